#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace kgeir {

// Minimal CSV reader: named header, any column order, double-quoted fields
// allowed (no embedded newlines). Line numbers are 1-based and include the
// header, so they match what an editor shows.
class CsvReader {
public:
    explicit CsvReader(const std::string& path);

    const std::vector<std::string>& header() const { return header_; }
    // index of a required column; throws naming the file and column
    int column(const std::string& name) const;
    // index of an optional column, -1 when absent
    int find_column(const std::string& name) const;

    // reads the next data row into `fields`; false at EOF. Blank lines skipped.
    bool next(std::vector<std::string>& fields);

    int line_number() const { return line_; }
    const std::string& path() const { return path_; }

    [[noreturn]] void fail_at(const std::string& msg) const;

private:
    std::string path_;
    std::ifstream in_;
    std::vector<std::string> header_;
    int line_ = 0;
};

std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_escape(const std::string& field);

// 64-bit integer parse with full-string validation
bool parse_int64(const std::string& s, std::int64_t& out);

// shortest round-trip formatting for doubles (%.17g trimmed via %g probing)
std::string format_double(double v);

// FNV-1a over bytes; used for config / dataset hashes in manifests
std::uint64_t fnv1a(const void* data, size_t n, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(const std::string& s, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace kgeir
