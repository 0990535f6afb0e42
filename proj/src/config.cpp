#include "kgeir/config.hpp"

#include <cstdlib>
#include <fstream>

#include "kgeir/csv.hpp"
#include "kgeir/error.hpp"

namespace kgeir {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace

Config::Config() {
    values_ = {
        {"attention_embed_size", "200"},
        {"top_k", "5"},
        {"dropout", "0.2"},
        {"learning_rate", "0.002"},
        {"epochs", "100"},
        {"alpha1", "0.7"},
        {"alpha2", "0.15"},
        {"alpha3", "0.15"},
        {"steps", "20"},
        {"seed", "0"},
        {"cdm", "nacd"},
        {"holdout_fraction", "0.5"},
        {"update_steps", "5"},
        {"update_lr", "0.1"},
        {"clip_k", "4"},
        {"history_window", "50"},
        {"delta_a", "0.5"},
        {"gcn_layers", "2"},
        {"ecov", "saturating"},
        {"batch_size", "512"},
        {"optimizer", "adam"},
        {"mirt_dim", "0"},          // 0 = use the skill count
        {"nacd_hidden", "64"},
        {"nacd_student_dim", "32"},
        {"nacd_literal_fe", "0"},   // 1 = drop the a^V edge term from F^E
        {"embed_epochs", "30"},
        {"need", "all"},
    };
}

Config Config::load(const std::string& path) {
    Config cfg;
    std::ifstream in(path);
    require(in.good(), "cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos,
                path + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        require(!key.empty(), path + ":" + std::to_string(lineno) + ": empty key");
        cfg.values_[key] = value;
    }
    return cfg;
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key) const {
    const auto it = values_.find(key);
    require(it != values_.end(), "config: unknown key '" + key + "'");
    char* end = nullptr;
    const double v = std::strtod(it->second.c_str(), &end);
    require(end == it->second.c_str() + it->second.size(),
            "config: key '" + key + "' is not a number: " + it->second);
    return v;
}

std::int64_t Config::get_int(const std::string& key) const {
    const auto it = values_.find(key);
    require(it != values_.end(), "config: unknown key '" + key + "'");
    std::int64_t v = 0;
    require(parse_int64(it->second, v),
            "config: key '" + key + "' is not an integer: " + it->second);
    return v;
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

std::string Config::canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

std::uint64_t Config::hash() const { return fnv1a(canonical()); }

}  // namespace kgeir
