#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mgsim/dynamics.hpp"
#include "mgsim/grid_model.hpp"
#include "mgsim/types.hpp"

namespace mgsim {

inline constexpr long long kScenarioSpacing = 900;  // s

/// Time-varying parameters on a common 15-min axis. Row k of every matrix
/// belongs to timestamps[k]; columns follow topology load / converter order.
struct ScenarioSeries {
    std::vector<long long> timestamps;
    std::vector<std::string> load_ids;
    std::vector<std::string> converter_ids;
    Matrix load_r, load_l;             // T x n_L
    Matrix p_star, q_star, u_star, xi;  // T x n_C

    std::size_t size() const { return timestamps.size(); }
};

struct ScenarioPoint {
    double t = 0.0;
    std::size_t row = 0;
    std::vector<LoadParams> loads;
    Exogenous exo;
    std::vector<std::string> warnings;  // setpoints outside converter limits
};

/// Reads loads.csv, setpoints_p.csv, setpoints_qu.csv and xi.csv from `dir`.
ScenarioSeries load_scenario(const std::filesystem::path& dir, const GridTopology& topology);

/// Writes the four files in shortest round-trip decimal form.
void write_scenario(const std::filesystem::path& dir, const ScenarioSeries& series);

/// Structural checks on an in-memory series; throws ValidationError.
void validate_scenario(const ScenarioSeries& series, const GridTopology& topology);

/// Zero-order hold: row with the latest timestamp <= t. Valid for
/// t in [first, last + 900).
ScenarioPoint point_at(const ScenarioSeries& series, const GridTopology& topology, double t, double omega_ref);

std::vector<double> allocate_storage_setpoints(double total_load_p, const std::vector<double>& renewable_forecast_p,
                                               const std::vector<ConverterParams>& storage);

/// Series RL load drawing (p, q) at voltage magnitude v and frequency omega_n.
LoadParams impedance_from_power(double p_load, double q_load, double v_nominal, double omega_n);

/// Steady-state (p, q) drawn by an RL load at (v, omega_n).
std::pair<double, double> power_from_impedance(const LoadParams& load, double v_nominal, double omega_n);

/// Bundled operating point: IEEE 33-bus nominal loads at v_nominal, wind/solar
/// forecast at 25% of P_max, storage by allocation, Q* = 0, U* = v_nominal, xi = 0.
ScenarioPoint nominal_point(const GridTopology& topology, double v_nominal, double omega_ref);

enum class XiSign { actual_minus_forecast, forecast_minus_actual };

struct ConvertOptions {
    double v_nominal = 0.0;  // V, required
    XiSign xi_sign = XiSign::actual_minus_forecast;
};

/// Builds the scenario schema from per-element power data:
///   load_power.csv   t_s, P_<load>, Q_<load>           (W, var)
///   renewables.csv   t_s, forecast_<conv>, actual_<conv> for wind/solar (W)
///   volt_var.csv     t_s, Qstar_<conv>, Ustar_<conv>    (var, V)
/// Storage P* comes from allocate_storage_setpoints on the unbalanced power.
ScenarioSeries convert_from_power(const std::filesystem::path& raw_dir, const GridTopology& topology,
                                  const ConvertOptions& options);

}  // namespace mgsim
