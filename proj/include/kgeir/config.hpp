#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace kgeir {

// key=value configuration with '#' comments. Unknown keys are kept so that
// presets (e.g. need.<name> relation subsets) can live in the same file.
class Config {
public:
    Config();  // defaults only
    static Config load(const std::string& path);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback = "") const;
    double get_double(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    void set(const std::string& key, const std::string& value);

    // canonical "key=value\n" dump, sorted by key; basis of the config hash
    std::string canonical() const;
    std::uint64_t hash() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace kgeir
