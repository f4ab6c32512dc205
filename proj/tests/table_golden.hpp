#pragma once

// Reads the golden generator and line tables in tests/data and compares them
// with the built-in defaults bit for bit.

#include <numbers>
#include <string>
#include <vector>

#include "mgsim/csv.hpp"
#include "mgsim/grid_model.hpp"

namespace mgsim::test {

inline double golden_value(const std::string& field) {
    if (field == "100pi") return 100.0 * std::numbers::pi;
    return csv::parse_double(field, "golden");
}

/// Returns one line per mismatch; empty when every value matches exactly.
inline std::vector<std::string> compare_with_golden(const std::string& dir) {
    std::vector<std::string> bad;
    const auto& d = default_parameters();
    const auto t1 = csv::read(dir + "/table1_generators.csv");
    if (t1.rows.size() != d.converters.size()) bad.push_back("generator count differs");
    for (std::size_t r = 0; r < t1.rows.size() && r < d.converters.size(); ++r) {
        const auto& row = t1.rows[r];
        const auto& p = d.converters[r];
        auto check = [&](const char* col, double actual, double scale = 1.0) {
            const double expected = golden_value(row[t1.column(col)]) * scale;
            if (actual != expected)
                bad.push_back(row[0] + "." + col + ": " + csv::format_shortest(actual) + " != " +
                              csv::format_shortest(expected));
        };
        if (default_converter_params(row[0]) != p) bad.push_back(row[0] + ": lookup by name differs");
        check("r_f", p.r_f);
        check("L_f", p.L_f);
        check("C_f", p.C_f);
        check("r_c", p.r_c);
        check("L_c", p.L_c);
        check("omega_c", p.omega_c);
        check("K_p", p.K_p);
        check("K_q", p.K_q);
        check("omega_n", p.omega_n);
        check("omega_star", p.omega_star);
        check("K_pv", p.K_pv);
        check("K_iv", p.K_iv);
        check("K_pc", p.K_pc);
        check("K_ic", p.K_ic);
        check("F", p.F);
        check("P_max_MW", p.P_max, 1e6);
        check("P_min_MW", p.P_min, 1e6);
        check("Q_max_MVAR", p.Q_max, 1e6);
        check("Q_min_MVAR", p.Q_min, 1e6);
    }
    const auto t2 = csv::read(dir + "/table2_lines.csv");
    if (t2.rows.size() != d.branches.size()) bad.push_back("line count differs");
    for (std::size_t r = 0; r < t2.rows.size() && r < d.branches.size(); ++r) {
        const auto& row = t2.rows[r];
        const auto& b = d.branches[r];
        const std::string tag = "line " + row[0] + "-" + row[1];
        if (b.from_bus != std::stoi(row[0]) || b.to_bus != std::stoi(row[1])) bad.push_back(tag + ": endpoints differ");
        if (b.params.r_B != golden_value(row[2])) bad.push_back(tag + ": r_B differs");
        if (b.params.L_B != golden_value(row[3])) bad.push_back(tag + ": L_B differs");
    }
    return bad;
}

}  // namespace mgsim::test
