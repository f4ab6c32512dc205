#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mgsim/types.hpp"

namespace mgsim {

enum class ConverterKind { wind, solar, storage };

std::string_view to_string(ConverterKind kind);
ConverterKind converter_kind_from_string(std::string_view name);

/// Per-generator constants. SI units throughout (power limits in W / var).
struct ConverterParams {
    double r_f = 0.0;         // filter resistance, ohm
    double L_f = 0.0;         // filter inductance, H
    double C_f = 0.0;         // filter capacitance, F
    double r_c = 0.0;         // coupling resistance, ohm
    double L_c = 0.0;         // coupling inductance, H
    double omega_c = 0.0;     // power-measurement filter cutoff, rad/s
    double K_p = 0.0;         // P-f droop, rad/s per W
    double K_q = 0.0;         // Q-V droop, V per var
    double K_pv = 0.0;
    double K_iv = 0.0;
    double K_pc = 0.0;
    double K_ic = 0.0;
    double F = 0.0;           // current feed-forward gain
    double omega_n = 0.0;     // nominal angular frequency, rad/s
    double omega_star = 0.0;  // frequency setpoint, rad/s
    double P_max = 0.0;
    double P_min = 0.0;
    double Q_max = 0.0;
    double Q_min = 0.0;
    ConverterKind kind = ConverterKind::storage;

    bool operator==(const ConverterParams&) const = default;
};

struct BranchParams {
    double r_B = 0.0;  // ohm
    double L_B = 0.0;  // H

    bool operator==(const BranchParams&) const = default;
};

struct LoadParams {
    double r_L = 0.0;  // ohm
    double L_L = 0.0;  // H

    bool operator==(const LoadParams&) const = default;
};

struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    BranchParams params;

    bool operator==(const Branch&) const = default;
};

struct Converter {
    std::string id;
    int bus = 0;
    ConverterParams params;

    bool operator==(const Converter&) const = default;
};

struct Load {
    std::string id;
    int bus = 0;

    bool operator==(const Load&) const = default;
};

/// Static structure of the microgrid. Immutable once validated.
struct GridTopology {
    std::vector<int> bus_ids;
    std::vector<Branch> branches;
    std::vector<Converter> converters;
    std::vector<Load> loads;

    std::size_t n_bus() const { return bus_ids.size(); }
    std::size_t n_converters() const { return converters.size(); }
    std::size_t n_loads() const { return loads.size(); }
    std::size_t n_branches() const { return branches.size(); }

    /// Column of `bus` in the incidence matrices; throws ValidationError if unknown.
    std::size_t bus_index(int bus) const;
    std::size_t converter_index(std::string_view id) const;
    std::size_t load_index(std::string_view id) const;

    /// Index of the converter whose id sorts first (natural order: G2 < G10).
    std::size_t reference_converter() const;

    bool operator==(const GridTopology&) const = default;
};

/// Selection and incidence matrices; columns follow GridTopology::bus_ids.
struct IncidenceMatrices {
    Matrix E_C;  // n_C x n_bus, one 1 per row
    Matrix E_L;  // n_L x n_bus, one 1 per row
    Matrix E_B;  // n_B x n_bus, +1 at from-bus, -1 at to-bus
};

/// Throws ValidationError naming the offending entity.
void validate_topology(const GridTopology& topology);

GridTopology parse_topology(std::string_view json_text);
GridTopology load_topology(const std::filesystem::path& path);
std::string serialize_topology(const GridTopology& topology);

IncidenceMatrices build_incidence(const GridTopology& topology);

struct DefaultParameters {
    std::vector<ConverterParams> converters;  // G1..G9
    std::vector<Branch> branches;             // 31 lines, table order
};

/// Built-in generator and line tables.
const DefaultParameters& default_parameters();

/// Default parameters of generator "G1".."G9"; throws ParseError for other names.
ConverterParams default_converter_params(std::string_view name);

/// The bundled 32-bus layout with documented converter/load placement.
GridTopology default_topology();

/// Nominal (P W, Q var) of the IEEE 33-bus load at `bus` (2..33).
std::pair<double, double> ieee33_nominal_load(int bus);

}  // namespace mgsim
