#include "viident/csv.hpp"

#include "viident/errors.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace viident {

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    std::array<char, 32> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), end);
}

double parse_double(std::string_view text) {
    if (text == "nan") return std::nan("");
    if (text == "inf") return INFINITY;
    if (text == "-inf") return -INFINITY;
    double value = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size()) {
        throw DomainError("not a number: '" + std::string(text) + "'");
    }
    return value;
}

void CsvTable::add_row(const std::vector<CsvCell>& cells) {
    if (cells.size() != header.size()) throw DomainError("csv row width does not match the header");
    std::vector<std::string> row;
    row.reserve(cells.size());
    for (const auto& cell : cells) {
        if (const auto* s = std::get_if<std::string>(&cell)) {
            row.push_back(*s);
        } else if (const auto* d = std::get_if<double>(&cell)) {
            row.push_back(format_double(*d));
        } else {
            row.push_back(std::to_string(std::get<std::int64_t>(cell)));
        }
    }
    rows.push_back(std::move(row));
}

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw DomainError("csv has no column '" + std::string(name) + "'");
}

const std::string& CsvTable::at(std::size_t row, std::string_view name) const {
    return rows.at(row).at(column(name));
}

double CsvTable::number(std::size_t row, std::string_view name) const {
    return parse_double(at(row, name));
}

namespace {

void append_line(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i].find_first_of(",\"\n\r") != std::string::npos) {
            throw DomainError("csv cell needs quoting: '" + cells[i] + "'");
        }
        if (i > 0) out += ',';
        out += cells[i];
    }
    out += '\n';
}

std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        cells.emplace_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

}  // namespace

std::string to_csv(const CsvTable& table) {
    std::string out;
    append_line(out, table.header);
    for (const auto& row : table.rows) append_line(out, row);
    return out;
}

void emit_csv(const CsvTable& table, const std::filesystem::path& path) {
    const std::string text = to_csv(table);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

CsvTable parse_csv(std::string_view text) {
    CsvTable table;
    std::size_t start = 0;
    bool first = true;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        start = end + 1;
        if (line.empty()) continue;
        auto cells = split(line);
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            if (cells.size() != table.header.size()) {
                throw DomainError("csv row width does not match the header");
            }
            table.rows.push_back(std::move(cells));
        }
    }
    if (first) throw DomainError("csv has no header row");
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_csv(buffer.str());
}

}  // namespace viident
