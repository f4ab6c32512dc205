#include "mgsim/dynamics.hpp"

#include <cmath>
#include <string>

#include "mgsim/errors.hpp"

namespace mgsim {

std::array<double, kConverterStates> ConverterState::to_array() const {
    return {delta, P, Q, phi_d, phi_q, gamma_d, gamma_q, i_ld, i_lq, v_od, v_oq, i_od, i_oq};
}

ConverterState ConverterState::from_array(const std::array<double, kConverterStates>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8], a[9], a[10], a[11], a[12]};
}

ControlInput ControlInput::zeros(std::size_t n) {
    const auto m = static_cast<Eigen::Index>(n);
    return {Vector::Zero(m), Vector::Zero(m)};
}

Exogenous Exogenous::zeros(std::size_t n, double omega_ref) {
    const auto m = static_cast<Eigen::Index>(n);
    return {Vector::Zero(m), Vector::Zero(m), Vector::Zero(m), Vector::Zero(m), omega_ref};
}

ConverterSetpoint setpoint_of(const Exogenous& exo, const ControlInput& u, std::size_t i) {
    const auto k = static_cast<Eigen::Index>(i);
    return {exo.P_star[k], exo.Q_star[k], exo.U_star[k], exo.xi[k], u.u_p[k], u.u_q[k], exo.omega_ref};
}

ConverterState converter_derivative(const ConverterState& s, double v_bus_d, double v_bus_q,
                                    const ConverterParams& p, const ConverterSetpoint& sp) {
    const double wn = p.omega_n;
    const double v_mag = sp.U_star - p.K_q * (s.Q - sp.Q_star) + sp.u_q;
    const double v_ref_d = std::cos(s.delta) * v_mag;
    const double v_ref_q = std::sin(s.delta) * v_mag;

    ConverterState d;
    d.delta = p.omega_star - p.K_p * (s.P - (sp.P_star + sp.xi)) + sp.u_p - sp.omega_ref;
    d.P = p.omega_c * (-s.P + s.v_od * s.i_od + s.v_oq * s.i_oq);
    d.Q = p.omega_c * (-s.Q + s.v_oq * s.i_od - s.v_od * s.i_oq);
    d.phi_d = v_ref_d - s.v_od;
    d.phi_q = v_ref_q - s.v_oq;
    d.gamma_d = p.F * s.i_od - wn * p.C_f * s.v_oq + p.K_pv * (v_ref_d - s.v_od) + p.K_iv * s.phi_d - s.i_ld;
    d.gamma_q = p.F * s.i_oq + wn * p.C_f * s.v_od + p.K_pv * (v_ref_q - s.v_oq) + p.K_iv * s.phi_q - s.i_lq;
    d.i_ld = (-p.r_f * s.i_ld +
              p.K_pc * (p.F * s.i_od - wn * p.C_f * s.v_oq + p.K_pv * (v_ref_d - s.v_od) + p.K_iv * s.phi_d -
                        s.i_ld) +
              p.K_ic * s.gamma_d - s.v_od) /
             p.L_f;
    d.i_lq = (-p.r_f * s.i_lq +
              p.K_pc * (p.F * s.i_oq + wn * p.C_f * s.v_od + p.K_pv * (v_ref_q - s.v_oq) + p.K_iv * s.phi_q -
                        s.i_lq) +
              p.K_ic * s.gamma_q - s.v_oq) /
             p.L_f;
    d.v_od = wn * s.v_oq + s.i_ld / p.C_f - s.i_od / p.C_f;
    d.v_oq = -wn * s.v_od + s.i_lq / p.C_f - s.i_oq / p.C_f;
    d.i_od = (-p.r_c * s.i_od + wn * s.i_oq * p.L_c + s.v_od - v_bus_d) / p.L_c;
    d.i_oq = (-p.r_c * s.i_oq - wn * s.i_od * p.L_c + s.v_oq - v_bus_q) / p.L_c;
    return d;
}

ConverterAlgebraics converter_algebraics(const ConverterState& s, const ConverterParams& p,
                                         const ConverterSetpoint& sp) {
    const double wn = p.omega_n;
    ConverterAlgebraics a;
    a.omega = p.omega_star - p.K_p * (s.P - (sp.P_star + sp.xi)) + sp.u_p;
    const double v_mag = sp.U_star - p.K_q * (s.Q - sp.Q_star) + sp.u_q;
    a.v_od_star = std::cos(s.delta) * v_mag;
    a.v_oq_star = std::sin(s.delta) * v_mag;
    a.i_ld_star = p.F * s.i_od - wn * p.C_f * s.v_oq + p.K_pv * (a.v_od_star - s.v_od) + p.K_iv * s.phi_d;
    a.i_lq_star = p.F * s.i_oq + wn * p.C_f * s.v_od + p.K_pv * (a.v_oq_star - s.v_oq) + p.K_iv * s.phi_q;
    a.v_id_star = -wn * p.L_f * s.i_lq + p.K_pc * (a.i_ld_star - s.i_ld) + p.K_ic * s.gamma_d;
    a.v_iq_star = wn * p.L_f * s.i_ld + p.K_pc * (a.i_lq_star - s.i_lq) + p.K_ic * s.gamma_q;
    return a;
}

ConverterState converter_derivative_stepwise(const ConverterState& s, double v_bus_d, double v_bus_q,
                                             const ConverterParams& p, const ConverterSetpoint& sp,
                                             ConverterAlgebraics* algebraics) {
    const double wn = p.omega_n;
    const ConverterAlgebraics a = converter_algebraics(s, p, sp);
    if (algebraics) *algebraics = a;

    ConverterState d;
    d.delta = a.omega - sp.omega_ref;
    d.P = p.omega_c * (-s.P + s.v_od * s.i_od + s.v_oq * s.i_oq);
    d.Q = p.omega_c * (-s.Q + s.v_oq * s.i_od - s.v_od * s.i_oq);
    d.phi_d = a.v_od_star - s.v_od;
    d.phi_q = a.v_oq_star - s.v_oq;
    d.gamma_d = a.i_ld_star - s.i_ld;
    d.gamma_q = a.i_lq_star - s.i_lq;
    d.i_ld = -p.r_f / p.L_f * s.i_ld + wn * s.i_lq + a.v_id_star / p.L_f - s.v_od / p.L_f;
    d.i_lq = -p.r_f / p.L_f * s.i_lq - wn * s.i_ld + a.v_iq_star / p.L_f - s.v_oq / p.L_f;
    d.v_od = wn * s.v_oq + s.i_ld / p.C_f - s.i_od / p.C_f;
    d.v_oq = -wn * s.v_od + s.i_lq / p.C_f - s.i_oq / p.C_f;
    d.i_od = -p.r_c / p.L_c * s.i_od + wn * s.i_oq + s.v_od / p.L_c - v_bus_d / p.L_c;
    d.i_oq = -p.r_c / p.L_c * s.i_oq - wn * s.i_od + s.v_oq / p.L_c - v_bus_q / p.L_c;
    return d;
}

LoadState load_derivative(const LoadState& s, double v_bus_d, double v_bus_q, const LoadParams& p,
                          double omega_n) {
    return {-p.r_L / p.L_L * s.i_Ld + omega_n * s.i_Lq + v_bus_d / p.L_L,
            -p.r_L / p.L_L * s.i_Lq - omega_n * s.i_Ld + v_bus_q / p.L_L};
}

BranchState branch_derivative(const BranchState& s, double v_diff_d, double v_diff_q, const BranchParams& p,
                              double omega_n) {
    return {-p.r_B / p.L_B * s.i_Bd + omega_n * s.i_Bq + v_diff_d / p.L_B,
            -p.r_B / p.L_B * s.i_Bq - omega_n * s.i_Bd + v_diff_q / p.L_B};
}

double network_omega(const GridTopology& topology) {
    return topology.converters.front().params.omega_n;
}

void check_converter_finite(const ConverterState& s, const std::string& converter_id) {
    const auto values = s.to_array();
    for (int k = 0; k < kConverterStates; ++k)
        if (!std::isfinite(values[static_cast<std::size_t>(k)]))
            throw NumericalError("non-finite state at converter " + converter_id + " field " +
                                 std::string(symbol_name(static_cast<ConverterSymbol>(k))));
}

namespace {

void check_setpoint_finite(const ConverterSetpoint& sp, const std::string& id) {
    const std::pair<const char*, double> fields[] = {{"P_star", sp.P_star}, {"Q_star", sp.Q_star},
                                                     {"U_star", sp.U_star}, {"xi", sp.xi},
                                                     {"u_p", sp.u_p},       {"u_q", sp.u_q},
                                                     {"omega_ref", sp.omega_ref}};
    for (const auto& [name, value] : fields)
        if (!std::isfinite(value))
            throw NumericalError("non-finite input at converter " + id + " field " + name);
}

}  // namespace

std::vector<ConverterState> converter_rhs(const std::vector<ConverterState>& states, const BusVoltages& bus_v,
                                          const GridTopology& topology, const Exogenous& exo,
                                          const ControlInput& u) {
    std::vector<ConverterState> out(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        const auto& c = topology.converters[i];
        const auto sp = setpoint_of(exo, u, i);
        check_converter_finite(states[i], c.id);
        check_setpoint_finite(sp, c.id);
        const auto b = static_cast<Eigen::Index>(topology.bus_index(c.bus));
        out[i] = converter_derivative(states[i], bus_v.v_Bd[b], bus_v.v_Bq[b], c.params, sp);
    }
    return out;
}

std::vector<LoadState> load_rhs(const std::vector<LoadState>& states, const BusVoltages& bus_v,
                                const GridTopology& topology, const std::vector<LoadParams>& params) {
    const double wn = network_omega(topology);
    std::vector<LoadState> out(states.size());
    for (std::size_t l = 0; l < states.size(); ++l) {
        const auto b = static_cast<Eigen::Index>(topology.bus_index(topology.loads[l].bus));
        out[l] = load_derivative(states[l], bus_v.v_Bd[b], bus_v.v_Bq[b], params[l], wn);
    }
    return out;
}

std::vector<BranchState> branch_rhs(const std::vector<BranchState>& states, const BusVoltages& bus_v,
                                    const GridTopology& topology) {
    const double wn = network_omega(topology);
    std::vector<BranchState> out(states.size());
    for (std::size_t k = 0; k < states.size(); ++k) {
        const auto& br = topology.branches[k];
        const auto f = static_cast<Eigen::Index>(topology.bus_index(br.from_bus));
        const auto t = static_cast<Eigen::Index>(topology.bus_index(br.to_bus));
        out[k] = branch_derivative(states[k], bus_v.v_Bd[f] - bus_v.v_Bd[t], bus_v.v_Bq[f] - bus_v.v_Bq[t],
                                   br.params, wn);
    }
    return out;
}

std::vector<ConverterAlgebraics> reconstruct_algebraics(const std::vector<ConverterState>& states,
                                                        const GridTopology& topology, const Exogenous& exo,
                                                        const ControlInput& u) {
    std::vector<ConverterAlgebraics> out(states.size());
    for (std::size_t i = 0; i < states.size(); ++i)
        out[i] = converter_algebraics(states[i], topology.converters[i].params, setpoint_of(exo, u, i));
    return out;
}

ConverterState converter_state(const StateLayout& layout, const Vector& x, std::size_t i) {
    std::array<double, kConverterStates> a{};
    for (int s = 0; s < kConverterStates; ++s)
        a[static_cast<std::size_t>(s)] =
            x[static_cast<Eigen::Index>(layout.converter(static_cast<ConverterSymbol>(s), i))];
    return ConverterState::from_array(a);
}

void store_converter_state(const StateLayout& layout, std::size_t i, const ConverterState& s, Vector& x) {
    const auto a = s.to_array();
    for (int k = 0; k < kConverterStates; ++k)
        x[static_cast<Eigen::Index>(layout.converter(static_cast<ConverterSymbol>(k), i))] =
            a[static_cast<std::size_t>(k)];
}

std::vector<ConverterState> converter_states(const StateLayout& layout, const Vector& x) {
    std::vector<ConverterState> out(layout.n_converters());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = converter_state(layout, x, i);
    return out;
}

std::vector<LoadState> load_states(const StateLayout& layout, const Vector& x) {
    std::vector<LoadState> out(layout.n_loads());
    for (std::size_t l = 0; l < out.size(); ++l)
        out[l] = {x[static_cast<Eigen::Index>(layout.load_d(l))], x[static_cast<Eigen::Index>(layout.load_q(l))]};
    return out;
}

std::vector<BranchState> branch_states(const StateLayout& layout, const Vector& x) {
    std::vector<BranchState> out(layout.n_branches());
    for (std::size_t b = 0; b < out.size(); ++b)
        out[b] = {x[static_cast<Eigen::Index>(layout.branch_d(b))],
                  x[static_cast<Eigen::Index>(layout.branch_q(b))]};
    return out;
}

}  // namespace mgsim
