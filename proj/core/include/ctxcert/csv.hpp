#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ctxcert::csv {

// Shortest decimal that round-trips to the same double.
std::string format_double(double value);
double parse_double(const std::string &text);

std::string escape(const std::string &field);
std::string join(const std::vector<std::string> &fields);
std::vector<std::string> split_line(const std::string &line);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Index of a header column; throws FormatError if absent.
    std::size_t column(const std::string &name) const;
};

Table read(const std::filesystem::path &path);
// Writes with "\n" line endings regardless of platform.
void write(const std::filesystem::path &path, const Table &table);

} // namespace ctxcert::csv
