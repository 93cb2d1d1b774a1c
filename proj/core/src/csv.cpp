#include "ctxcert/csv.hpp"

#include "ctxcert/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace ctxcert::csv {

std::string format_double(double value)
{
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

double parse_double(const std::string &text)
{
    double value = 0.0;
    const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
    if (result.ec != std::errc() || result.ptr != text.data() + text.size())
        throw FormatError("not a number: '" + text + "'");
    return value;
}

std::string escape(const std::string &field)
{
    if (field.find_first_of(",\"\n") == std::string::npos)
        return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

std::string join(const std::vector<std::string> &fields)
{
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0)
            line += ',';
        line += escape(fields[i]);
    }
    return line;
}

std::vector<std::string> split_line(const std::string &line)
{
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                current += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                current += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else if (c != '\r') {
            current += c;
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::size_t Table::column(const std::string &name) const
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return i;
    throw FormatError("CSV has no column '" + name + "'");
}

Table read(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    Table table;
    std::string line;
    if (!std::getline(in, line))
        throw FormatError(path.string() + ": empty CSV");
    table.header = split_line(line);
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        auto fields = split_line(line);
        if (fields.size() != table.header.size())
            throw FormatError(path.string() + ": row has " + std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(table.header.size()));
        table.rows.push_back(std::move(fields));
    }
    return table;
}

void write(const std::filesystem::path &path, const Table &table)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << join(table.header) << '\n';
    for (const auto &row : table.rows)
        out << join(row) << '\n';
    if (!out)
        throw IoError("write failed for " + path.string());
}

} // namespace ctxcert::csv
