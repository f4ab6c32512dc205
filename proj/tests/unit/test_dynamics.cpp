#include <gtest/gtest.h>

#include <random>

#include "mgsim/dynamics.hpp"
#include "mgsim/errors.hpp"
#include "support.hpp"

using namespace mgsim;

namespace {

ConverterState random_converter(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const double scale[kConverterStates] = {0.5, 1e6, 1e6, 10, 10, 1, 1, 200, 200, 1.3e4, 1.3e4, 200, 200};
    std::array<double, kConverterStates> a{};
    for (int k = 0; k < kConverterStates; ++k) a[static_cast<std::size_t>(k)] = scale[k] * U(rng);
    return ConverterState::from_array(a);
}

ConverterSetpoint random_setpoint(std::mt19937_64& rng, double omega_ref) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    return {1e6 * U(rng), 5e5 * U(rng), 12.66e3 * (1 + 0.05 * U(rng)), 1e5 * U(rng), 0.5 * U(rng), 100 * U(rng),
            omega_ref};
}

}  // namespace

// The substituted closed form must agree with evaluating the controller chain in order.
TEST(Dynamics, ReducedMatchesStepwise) {
    std::mt19937_64 rng(11);
    for (int g = 1; g <= 9; ++g) {
        const auto p = default_converter_params("G" + std::to_string(g));
        for (int trial = 0; trial < 50; ++trial) {
            const auto s = random_converter(rng);
            const auto sp = random_setpoint(rng, p.omega_n);
            std::uniform_real_distribution<double> U(-1.3e4, 1.3e4);
            const double vd = U(rng), vq = U(rng);
            const auto a = converter_derivative(s, vd, vq, p, sp).to_array();
            const auto b = converter_derivative_stepwise(s, vd, vq, p, sp).to_array();
            for (int k = 0; k < kConverterStates; ++k) {
                const auto i = static_cast<std::size_t>(k);
                EXPECT_NEAR(a[i], b[i], 1e-9 * std::max(1.0, std::abs(b[i])))
                    << "G" << g << " " << symbol_name(static_cast<ConverterSymbol>(k));
            }
        }
    }
}

TEST(Dynamics, DroopLaw) {
    const auto p = default_converter_params("G1");
    ConverterState s;
    s.P = 2e5;
    ConverterSetpoint sp{1e5, 0, 12.66e3, 3e4, 0.25, 0, p.omega_n};
    const auto d = converter_derivative(s, 0, 0, p, sp);
    EXPECT_DOUBLE_EQ(d.delta, p.omega_star - p.K_p * (2e5 - 1.3e5) + 0.25 - p.omega_n);
    ConverterAlgebraics alg;
    converter_derivative_stepwise(s, 0, 0, p, sp, &alg);
    EXPECT_DOUBLE_EQ(alg.omega, p.omega_star - p.K_p * (2e5 - 1.3e5) + 0.25);
}

TEST(Dynamics, VoltageReferenceFollowsAngle) {
    const auto p = default_converter_params("G2");
    ConverterState s;
    s.delta = 0.3;
    s.Q = 1e5;
    const ConverterSetpoint sp{0, 2e4, 12.66e3, 0, 0, 50, p.omega_n};
    const auto a = converter_algebraics(s, p, sp);
    const double mag = 12.66e3 - p.K_q * (1e5 - 2e4) + 50;
    EXPECT_DOUBLE_EQ(a.v_od_star, mag * std::cos(0.3));
    EXPECT_DOUBLE_EQ(a.v_oq_star, mag * std::sin(0.3));
}

TEST(Dynamics, PowerFilter) {
    const auto p = default_converter_params("G3");
    ConverterState s;
    s.v_od = 100;
    s.v_oq = 20;
    s.i_od = 3;
    s.i_oq = -4;
    s.P = 10;
    s.Q = -7;
    const auto d = converter_derivative(s, 0, 0, p, {0, 0, 0, 0, 0, 0, p.omega_n});
    EXPECT_DOUBLE_EQ(d.P, p.omega_c * (-10 + 100 * 3 + 20 * -4));
    EXPECT_DOUBLE_EQ(d.Q, p.omega_c * (7 + 20 * 3 - 100 * -4));
}

TEST(Dynamics, RlElements) {
    const LoadParams lp{20.0, 0.05};
    const auto d = load_derivative({10.0, -2.0}, 300.0, 50.0, lp, 100.0);
    EXPECT_DOUBLE_EQ(d.i_Ld, -20.0 / 0.05 * 10.0 + 100.0 * -2.0 + 300.0 / 0.05);
    EXPECT_DOUBLE_EQ(d.i_Lq, -20.0 / 0.05 * -2.0 - 100.0 * 10.0 + 50.0 / 0.05);
    // same form for lines
    const auto b = branch_derivative({10.0, -2.0}, 300.0, 50.0, {20.0, 0.05}, 100.0);
    EXPECT_DOUBLE_EQ(b.i_Bd, d.i_Ld);
    EXPECT_DOUBLE_EQ(b.i_Bq, d.i_Lq);
}

TEST(Dynamics, GatherScatterRoundTrip) {
    const StateLayout L(9, 23, 31);
    std::mt19937_64 rng(2);
    const Vector x = test::random_state(L, rng);
    Vector y = Vector::Zero(x.size());
    const auto cs = converter_states(L, x);
    ASSERT_EQ(cs.size(), 9u);
    for (std::size_t i = 0; i < 9; ++i) store_converter_state(L, i, cs[i], y);
    EXPECT_EQ(y.head(117), x.head(117));
    const auto ls = load_states(L, x);
    EXPECT_EQ(ls[4].i_Lq, x[static_cast<Eigen::Index>(L.load_q(4))]);
    const auto bs = branch_states(L, x);
    EXPECT_EQ(bs[30].i_Bd, x[static_cast<Eigen::Index>(L.branch_d(30))]);
}

TEST(Dynamics, NonFiniteNamesConverterAndField) {
    ConverterState s;
    s.gamma_q = std::nan("");
    try {
        check_converter_finite(s, "G4");
        FAIL();
    } catch (const NumericalError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("G4"), std::string::npos);
        EXPECT_NE(msg.find("gamma_q"), std::string::npos);
    }
}

TEST(Dynamics, VectorisedMatchesKernels) {
    auto n = test::nominal();
    const auto& t = *n.topology;
    const auto& L = n.model->layout();
    std::mt19937_64 rng(8);
    const Vector x = test::random_state(L, rng);
    const auto exo = test::random_exo(t.n_converters(), n.point.exo.omega_ref, rng);
    const auto u = test::random_u(t.n_converters(), rng);
    const Vector dx = n.model->ode_rhs(x, exo, u);
    const auto z = n.model->solve_bus_voltages(x);
    const auto conv = converter_rhs(converter_states(L, x), z, t, exo, u);
    const auto loads = load_rhs(load_states(L, x), z, t, n.model->load_params());
    const auto branches = branch_rhs(branch_states(L, x), z, t);
    Vector y(x.size());
    for (std::size_t i = 0; i < conv.size(); ++i) store_converter_state(L, i, conv[i], y);
    for (std::size_t l = 0; l < loads.size(); ++l) {
        y[static_cast<Eigen::Index>(L.load_d(l))] = loads[l].i_Ld;
        y[static_cast<Eigen::Index>(L.load_q(l))] = loads[l].i_Lq;
    }
    for (std::size_t k = 0; k < branches.size(); ++k) {
        y[static_cast<Eigen::Index>(L.branch_d(k))] = branches[k].i_Bd;
        y[static_cast<Eigen::Index>(L.branch_q(k))] = branches[k].i_Bq;
    }
    EXPECT_LT(test::block_rel_diff(L, y, dx), 1e-12);
}

TEST(Dynamics, ReconstructedAlgebraics) {
    auto n = test::nominal();
    std::mt19937_64 rng(9);
    const Vector x = test::random_state(n.model->layout(), rng);
    const auto cs = converter_states(n.model->layout(), x);
    const auto alg = reconstruct_algebraics(cs, *n.topology, n.point.exo, n.u);
    ASSERT_EQ(alg.size(), 9u);
    for (std::size_t i = 0; i < 9; ++i) {
        const auto a = converter_algebraics(cs[i], n.topology->converters[i].params, setpoint_of(n.point.exo, n.u, i));
        EXPECT_EQ(alg[i].omega, a.omega);
        EXPECT_EQ(alg[i].v_iq_star, a.v_iq_star);
    }
}
