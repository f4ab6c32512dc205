#include "mgsim/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mgsim/errors.hpp"

namespace mgsim::csv {

std::string format_shortest(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

std::string format17(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    return npos;
}

namespace {

std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        auto field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
        out.emplace_back(field);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

Table read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("missing file " + path.string());
    Table t;
    t.path = path;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (line.empty()) continue;
        auto fields = split(line);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size())
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(line_no);
    }
    if (!have_header) throw ParseError(path.string() + ": empty file (no header)");
    return t;
}

double parse_double(std::string_view field, const std::string& context) {
    double value = 0.0;
    const auto* end = field.data() + field.size();
    auto res = std::from_chars(field.data(), end, value);
    if (res.ec != std::errc() || res.ptr != end || field.empty())
        throw ParseError(context + ": cannot parse '" + std::string(field) + "' as a number");
    return value;
}

long long parse_int(std::string_view field, const std::string& context) {
    long long value = 0;
    const auto* end = field.data() + field.size();
    auto res = std::from_chars(field.data(), end, value);
    if (res.ec != std::errc() || res.ptr != end || field.empty())
        throw ParseError(context + ": cannot parse '" + std::string(field) + "' as an integer");
    return value;
}

std::string join(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += fields[i];
    }
    return out;
}

void write_matrix(const std::filesystem::path& path, const Matrix& m, const std::vector<std::string>& row_labels,
                  const std::vector<std::string>& col_labels) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << "row";
    for (const auto& c : col_labels) out << ',' << c;
    out << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        out << row_labels[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << format17(m(i, j));
        out << '\n';
    }
}

}  // namespace mgsim::csv
