#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace viident {

using CsvCell = std::variant<std::string, double, std::int64_t>;

/// Shortest decimal text that reads back to exactly the same double.
std::string format_double(double value);
/// Strict decimal parse (the whole field must be consumed).
double parse_double(std::string_view text);

/// A header row plus text rows; numbers are formatted on insertion.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(const std::vector<CsvCell>& cells);
    std::size_t column(std::string_view name) const;
    const std::string& at(std::size_t row, std::string_view name) const;
    double number(std::size_t row, std::string_view name) const;
};

/// Comma separated, header first, one '\n'-terminated line per row. Cells
/// must not contain commas, quotes or line breaks.
std::string to_csv(const CsvTable& table);
void emit_csv(const CsvTable& table, const std::filesystem::path& path);

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace viident
