#pragma once

#include <array>
#include <vector>

#include "mgsim/grid_model.hpp"
#include "mgsim/state_layout.hpp"
#include "mgsim/types.hpp"

namespace mgsim {

/// The 13 states of one converter, in stacking order.
struct ConverterState {
    double delta = 0.0;
    double P = 0.0, Q = 0.0;
    double phi_d = 0.0, phi_q = 0.0;
    double gamma_d = 0.0, gamma_q = 0.0;
    double i_ld = 0.0, i_lq = 0.0;
    double v_od = 0.0, v_oq = 0.0;
    double i_od = 0.0, i_oq = 0.0;

    std::array<double, kConverterStates> to_array() const;
    static ConverterState from_array(const std::array<double, kConverterStates>& a);
};

struct LoadState {
    double i_Ld = 0.0, i_Lq = 0.0;
};

struct BranchState {
    double i_Bd = 0.0, i_Bq = 0.0;
};

/// Secondary control inputs, one entry per converter.
struct ControlInput {
    Vector u_p;  // rad/s
    Vector u_q;  // V

    static ControlInput zeros(std::size_t n_converters);
};

/// Time-varying setpoints and forecast errors, one entry per converter.
struct Exogenous {
    Vector xi;      // W, zero for storage
    Vector P_star;  // W
    Vector Q_star;  // var
    Vector U_star;  // V
    double omega_ref = 0.0;

    static Exogenous zeros(std::size_t n_converters, double omega_ref);
};

/// Intermediates eliminated from the full converter model; diagnostics only.
struct ConverterAlgebraics {
    double omega = 0.0;
    double v_od_star = 0.0, v_oq_star = 0.0;
    double i_ld_star = 0.0, i_lq_star = 0.0;
    double v_id_star = 0.0, v_iq_star = 0.0;
};

struct BusVoltages {
    Vector v_Bd;
    Vector v_Bq;
};

/// Setpoint slice seen by a single converter.
struct ConverterSetpoint {
    double P_star = 0.0, Q_star = 0.0, U_star = 0.0, xi = 0.0;
    double u_p = 0.0, u_q = 0.0;
    double omega_ref = 0.0;
};

ConverterSetpoint setpoint_of(const Exogenous& exo, const ControlInput& u, std::size_t i);

// Single-element kernels. v_bus_* is the voltage of the bus the element attaches to
// (for branches: from-bus minus to-bus).

/// Reduced converter model with the controller references substituted in.
ConverterState converter_derivative(const ConverterState& s, double v_bus_d, double v_bus_q,
                                    const ConverterParams& p, const ConverterSetpoint& sp);

/// Full model evaluated step by step: frequency, voltage refs, current refs,
/// modulation refs, then the state derivatives.
ConverterState converter_derivative_stepwise(const ConverterState& s, double v_bus_d, double v_bus_q,
                                             const ConverterParams& p, const ConverterSetpoint& sp,
                                             ConverterAlgebraics* algebraics = nullptr);

ConverterAlgebraics converter_algebraics(const ConverterState& s, const ConverterParams& p,
                                         const ConverterSetpoint& sp);

LoadState load_derivative(const LoadState& s, double v_bus_d, double v_bus_q, const LoadParams& p,
                          double omega_n);

BranchState branch_derivative(const BranchState& s, double v_diff_d, double v_diff_q,
                              const BranchParams& p, double omega_n);

// Vectorised forms over the whole grid.

std::vector<ConverterState> converter_rhs(const std::vector<ConverterState>& states, const BusVoltages& bus_v,
                                          const GridTopology& topology, const Exogenous& exo,
                                          const ControlInput& u);

std::vector<LoadState> load_rhs(const std::vector<LoadState>& states, const BusVoltages& bus_v,
                                const GridTopology& topology, const std::vector<LoadParams>& params);

std::vector<BranchState> branch_rhs(const std::vector<BranchState>& states, const BusVoltages& bus_v,
                                    const GridTopology& topology);

std::vector<ConverterAlgebraics> reconstruct_algebraics(const std::vector<ConverterState>& states,
                                                        const GridTopology& topology, const Exogenous& exo,
                                                        const ControlInput& u);

/// Common dq-frame frequency (all converters share omega_n).
double network_omega(const GridTopology& topology);

// Gather/scatter between the stacked state vector and per-element structs.
ConverterState converter_state(const StateLayout& layout, const Vector& x, std::size_t i);
void store_converter_state(const StateLayout& layout, std::size_t i, const ConverterState& s, Vector& x);
std::vector<ConverterState> converter_states(const StateLayout& layout, const Vector& x);
std::vector<LoadState> load_states(const StateLayout& layout, const Vector& x);
std::vector<BranchState> branch_states(const StateLayout& layout, const Vector& x);

/// Throws NumericalError naming the converter and field if any entry is non-finite.
void check_converter_finite(const ConverterState& s, const std::string& converter_id);

}  // namespace mgsim
