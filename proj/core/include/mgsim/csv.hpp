#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mgsim/types.hpp"

namespace mgsim::csv {

/// Shortest decimal form that parses back to the same double.
std::string format_shortest(double value);

/// Seventeen significant digits ("%.17g").
std::string format17(double value);

/// Comma-separated text file with a header row. Empty lines are skipped;
/// `line_numbers` holds the 1-based source line of each row.
struct Table {
    std::filesystem::path path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;

    /// Column index of `name`, or npos.
    std::size_t column(std::string_view name) const;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// Throws ParseError with file context when the file is missing or ragged.
Table read(const std::filesystem::path& path);

/// Strict full-field double parse; throws ParseError mentioning `context`.
double parse_double(std::string_view field, const std::string& context);
long long parse_int(std::string_view field, const std::string& context);

std::string join(const std::vector<std::string>& fields);

/// Dense matrix with a header of column labels and a leading row-label column.
void write_matrix(const std::filesystem::path& path, const Matrix& m, const std::vector<std::string>& row_labels,
                  const std::vector<std::string>& col_labels);

}  // namespace mgsim::csv
