#include "kgeir/csv.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "kgeir/error.hpp"

namespace kgeir {

CsvReader::CsvReader(const std::string& path) : path_(path), in_(path) {
    require(in_.good(), "cannot open file: " + path);
    std::string line;
    require(static_cast<bool>(std::getline(in_, line)), "empty file: " + path);
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    header_ = split_csv_line(line);
}

int CsvReader::column(const std::string& name) const {
    const int idx = find_column(name);
    if (idx < 0) fail(path_ + ": missing required column '" + name + "'");
    return idx;
}

int CsvReader::find_column(const std::string& name) const {
    const auto it = std::find(header_.begin(), header_.end(), name);
    return it == header_.end() ? -1 : static_cast<int>(it - header_.begin());
}

bool CsvReader::next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        fields = split_csv_line(line);
        return true;
    }
    return false;
}

void CsvReader::fail_at(const std::string& msg) const {
    fail(path_ + ":" + std::to_string(line_) + ": " + msg);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"' && cur.empty()) {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

bool parse_int64(const std::string& s, std::int64_t& out) {
    if (s.empty()) return false;
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (errno != 0 || end != s.c_str() + s.size()) return false;
    out = v;
    return true;
}

std::string format_double(double v) {
    char buf[40];
    // shortest representation that round-trips
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::uint64_t fnv1a(const void* data, size_t n, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t seed) { return fnv1a(s.data(), s.size(), seed); }

}  // namespace kgeir
