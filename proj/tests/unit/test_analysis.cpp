#include <gtest/gtest.h>

#include <random>

#include "mgsim/analysis.hpp"
#include "mgsim/csv.hpp"
#include "mgsim/equilibrium.hpp"
#include "mgsim/errors.hpp"
#include "support.hpp"

using namespace mgsim;
using Idx = Eigen::Index;

namespace {

struct Fixture {
    test::Nominal n = test::nominal();
    EquilibriumResult eq = find_equilibrium(*n.model, n.point.exo, n.u);
};

const Fixture& fx() {
    static const Fixture f;
    return f;
}

const SmallSignalResult& small_signal() {
    static const SmallSignalResult r =
        linearize(*fx().n.model, fx().eq.x_eq, fx().n.point.exo, fx().n.u, fx().eq.omega_dev);
    return r;
}

}  // namespace

// Load currents enter linearly, so their Jacobian rows are known in closed form.
TEST(Analysis, LoadRowsMatchClosedForm) {
    const auto& m = *fx().n.model;
    const auto& L = m.layout();
    const Matrix J = jacobian_fd(m, fx().eq.x_eq, fx().n.point.exo, fx().n.u);
    for (std::size_t l = 0; l < m.topology().n_loads(); l += 5) {
        const auto& p = m.load_params()[l];
        const Idx b = m.load_bus()[l];
        Vector row = Vector::Zero(225);
        row.tail(144) = -m.M2_inv_M1().row(b).transpose() / p.L_L;
        row[static_cast<Idx>(L.load_d(l))] += -p.r_L / p.L_L;
        row[static_cast<Idx>(L.load_q(l))] += m.omega_n();
        const Vector got = J.row(static_cast<Idx>(L.load_d(l))).transpose();
        EXPECT_LT((got - row).cwiseAbs().maxCoeff(), 1e-6 * row.cwiseAbs().maxCoeff()) << "load " << l;
    }
}

TEST(Analysis, JacobianVectorProduct) {
    const auto& m = *fx().n.model;
    const Vector& x = fx().eq.x_eq;
    const Matrix J = jacobian_fd(m, x, fx().n.point.exo, fx().n.u);
    std::mt19937_64 rng(21);
    const Vector s = block_scale(m.layout(), x, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        std::normal_distribution<double> N(0.0, 1.0);
        Vector v(x.size());
        for (Idx i = 0; i < v.size(); ++i) v[i] = 1e-6 * s[i] * N(rng);
        const Vector fd = (m.ode_rhs(x + v, fx().n.point.exo, fx().n.u) - m.ode_rhs(x - v, fx().n.point.exo, fx().n.u)) / 2.0;
        const Vector jv = J * v;
        EXPECT_LT((jv - fd).cwiseAbs().maxCoeff(), 1e-5 * fd.cwiseAbs().maxCoeff());
    }
}

TEST(Analysis, ManifoldBasis) {
    const auto& m = *fx().n.model;
    const Matrix N = kcl_manifold_basis(m);
    ASSERT_EQ(N.rows(), 225);
    ASSERT_EQ(N.cols(), 161);
    EXPECT_LT((N.transpose() * N - Matrix::Identity(161, 161)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((m.kcl_matrix() * N).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Analysis, ModeClassification) {
    const auto& r = small_signal();
    ASSERT_EQ(r.eigenvalues.size(), 225u);
    std::size_t zero = 0, kcl = 0, dyn = 0;
    for (auto k : r.kinds) {
        zero += k == ModeKind::zero_mode;
        kcl += k == ModeKind::kcl_invariant;
        dyn += k == ModeKind::dynamic;
    }
    EXPECT_EQ(zero, 1u);
    EXPECT_EQ(kcl, 64u);
    EXPECT_EQ(dyn, 160u);
    EXPECT_EQ(r.n_dynamic, 161u);
    EXPECT_EQ(r.kinds[r.zero_mode_index], ModeKind::zero_mode);
    EXPECT_LT(std::abs(r.eigenvalues[r.zero_mode_index]), r.zero_threshold);
    EXPECT_DOUBLE_EQ(r.zero_threshold, 1e-6 * r.spectral_radius);
    EXPECT_LT(r.spectral_abscissa_excl, 0.0);
    EXPECT_LE(r.zero_mode_angle, 1e-3);
    for (std::size_t k = 1; k < r.eigenvalues.size(); ++k)
        EXPECT_GE(r.eigenvalues[k - 1].real(), r.eigenvalues[k].real());
}

TEST(Analysis, ConjugateSymmetry) {
    const auto& r = small_signal();
    for (const auto& z : r.eigenvalues) {
        if (std::abs(z.imag()) == 0.0) continue;
        double best = 1e300;
        for (const auto& w : r.eigenvalues) best = std::min(best, std::abs(w - std::conj(z)));
        EXPECT_LT(best, 1e-10 * r.spectral_radius) << z;
    }
}

TEST(Analysis, SecondZeroFromRigidRotation) {
    // the zero mode's eigenvector is the rotation generator
    const auto& m = *fx().n.model;
    const Vector g = rotation_generator(m.layout(), fx().eq.x_eq);
    const Matrix J = small_signal().jacobian;
    const Vector jg = J * g;
    EXPECT_LT(jg.norm(), 1e-4 * J.norm() * g.norm());
}

TEST(Analysis, RejectsNonEquilibrium) {
    const auto& m = *fx().n.model;
    Vector x = fx().eq.x_eq;
    x[static_cast<Idx>(m.layout().converter(ConverterSymbol::P, 2))] *= 1.01;
    EXPECT_THROW(linearize(m, x, fx().n.point.exo, fx().n.u, fx().eq.omega_dev), NumericalError);
}

TEST(Analysis, DiagnosticsPowerBalance) {
    const auto d = state_diagnostics(*fx().n.model, fx().eq.x_eq, 4.0);
    EXPECT_EQ(d.t, 4.0);
    EXPECT_GT(d.total_gen_p, 0.0);
    EXPECT_NEAR(d.total_gen_p, d.total_load_p + d.total_loss_p, 1e-6 * d.total_gen_p);
    EXPECT_DOUBLE_EQ(d.total_loss_p, d.branch_loss_p + d.coupling_loss_p);
    EXPECT_LT(std::max(d.kcl_residual_d, d.kcl_residual_q), 1e-6);
}

TEST(Analysis, ConverterFrequenciesAgreeAtEquilibrium) {
    const Vector w = converter_frequencies(*fx().n.model, fx().eq.x_eq, fx().n.point.exo, fx().n.u);
    ASSERT_EQ(w.size(), 9);
    for (Idx i = 0; i < 9; ++i) EXPECT_NEAR(w[i], fx().eq.omega_sync, 1e-8);
}

TEST(Analysis, EigenCsv) {
    const auto dir = test::temp_dir("eig");
    write_eigen_csv(dir / "eig.csv", small_signal());
    const auto t = csv::read(dir / "eig.csv");
    EXPECT_EQ(t.header, (std::vector<std::string>{"re", "im", "kind"}));
    ASSERT_EQ(t.rows.size(), 225u);
    EXPECT_EQ(csv::parse_double(t.rows[0][0], "re"), small_signal().eigenvalues[0].real());
    EXPECT_EQ(to_string(ModeKind::kcl_invariant), "kcl_invariant");
}
