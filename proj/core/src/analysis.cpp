#include "mgsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "mgsim/csv.hpp"
#include "mgsim/equilibrium.hpp"
#include "mgsim/errors.hpp"

namespace mgsim {

namespace {

using Idx = Eigen::Index;
using cd = std::complex<double>;

Idx ix(std::size_t i) { return static_cast<Idx>(i); }

std::vector<Idx> current_indices(const StateLayout& L) {
    std::vector<Idx> idx;
    for (std::size_t i = 0; i < L.n_converters(); ++i) idx.push_back(ix(L.converter(ConverterSymbol::i_od, i)));
    for (std::size_t i = 0; i < L.n_converters(); ++i) idx.push_back(ix(L.converter(ConverterSymbol::i_oq, i)));
    for (std::size_t k = L.load_d(0); k < L.size(); ++k) idx.push_back(ix(k));
    return idx;
}

}  // namespace

std::string_view to_string(ModeKind k) {
    switch (k) {
        case ModeKind::dynamic: return "dynamic";
        case ModeKind::zero_mode: return "zero_mode";
        case ModeKind::kcl_invariant: return "kcl_invariant";
    }
    return "?";
}

Matrix jacobian_fd(const ReducedModel& model, const Vector& x, const Exogenous& exo, const ControlInput& u,
                   double omega_dev) {
    const Idx n = x.size();
    const auto& L = model.layout();
    auto F = [&](const Vector& y) { return Vector(model.ode_rhs(y, exo, u) - omega_dev * rotation_generator(L, y)); };
    Matrix J(n, n);
    Vector xp = x, xm = x;
    // floor scaled by the block magnitude: a bare 1e-9 on a near-zero angle
    // drowns the column in roundoff from the kA/s current rows
    const Vector typ = block_scale(L, x, 1.0);
    for (Idx j = 0; j < n; ++j) {
        const double h = std::max(1e-7 * std::abs(x[j]), 1e-7 * typ[j]);
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        J.col(j) = (F(xp) - F(xm)) / (xp[j] - xm[j]);
        xp[j] = xm[j] = x[j];
    }
    return J;
}

Matrix kcl_manifold_basis(const ReducedModel& model) {
    const auto& L = model.layout();
    const Idx n = ix(L.size());
    const auto cur = current_indices(L);
    const Matrix& C = model.kcl_matrix();
    Matrix Cc(C.rows(), ix(cur.size()));
    for (std::size_t k = 0; k < cur.size(); ++k) Cc.col(ix(k)) = C.col(cur[k]);

    // null space of the current block via complete orthogonal decomposition of Cc^T
    Eigen::FullPivHouseholderQR<Matrix> qr(Cc.transpose());
    const Idx rank = qr.rank();
    if (rank != C.rows()) throw NumericalError("KCL matrix is rank deficient");
    const Matrix Q = qr.matrixQ();
    const Matrix null = Q.rightCols(Q.cols() - rank);

    std::vector<bool> is_current(static_cast<std::size_t>(n), false);
    for (Idx c : cur) is_current[static_cast<std::size_t>(c)] = true;
    const Idx n_other = n - ix(cur.size());
    Matrix N = Matrix::Zero(n, n_other + null.cols());
    Idx col = 0;
    for (Idx i = 0; i < n; ++i)
        if (!is_current[static_cast<std::size_t>(i)]) N(i, col++) = 1.0;
    for (std::size_t k = 0; k < cur.size(); ++k) N.row(cur[k]).tail(null.cols()) = null.row(ix(k));
    return N;
}

SmallSignalResult linearize(const ReducedModel& model, const Vector& x_eq, const Exogenous& exo, const ControlInput& u,
                            double omega_dev) {
    const auto& L = model.layout();
    const double residual = equilibrium_residual(model, x_eq, omega_dev, exo, u).lpNorm<Eigen::Infinity>();
    const double scale = std::max(1.0, x_eq.lpNorm<Eigen::Infinity>());
    if (residual > 1e-8 * scale)
        throw NumericalError("linearize: state is not an equilibrium (residual " + csv::format_shortest(residual) +
                             ", limit " + csv::format_shortest(1e-8 * scale) + ")");

    SmallSignalResult r;
    r.omega_dev = omega_dev;
    r.jacobian = jacobian_fd(model, x_eq, exo, u, omega_dev);

    // The Jacobian maps into the KCL manifold, so its spectrum is the
    // restriction's spectrum plus one zero per KCL row.
    const Matrix N = kcl_manifold_basis(model);
    const Matrix Jr = N.transpose() * r.jacobian * N;
    Eigen::EigenSolver<Matrix> es(Jr, true);
    if (es.info() != Eigen::Success) throw NumericalError("eigenvalue decomposition failed");
    const Eigen::VectorXcd lam = es.eigenvalues();
    const Idx nd = lam.size();
    r.n_dynamic = static_cast<std::size_t>(nd);

    r.spectral_radius = lam.cwiseAbs().maxCoeff();
    r.zero_threshold = 1e-6 * r.spectral_radius;
    Idx zmin = 0;
    for (Idx k = 1; k < nd; ++k)
        if (std::abs(lam[k]) < std::abs(lam[zmin])) zmin = k;
    double second = INFINITY;
    for (Idx k = 0; k < nd; ++k)
        if (k != zmin) second = std::min(second, std::abs(lam[k]));
    const double zabs = std::abs(lam[zmin]);
    if (zabs > r.zero_threshold)
        throw NumericalError("no zero mode: smallest |lambda| = " + csv::format_shortest(zabs) + " exceeds threshold " +
                             csv::format_shortest(r.zero_threshold));
    if (second <= r.zero_threshold || second < 10.0 * zabs)
        throw NumericalError("ambiguous zero mode: |lambda| = " + csv::format_shortest(zabs) + " and " +
                             csv::format_shortest(second));

    const Eigen::VectorXcd v = N.cast<cd>() * es.eigenvectors().col(zmin);
    const Vector g = rotation_generator(L, x_eq);
    const double c = std::abs(v.dot(g.cast<cd>())) / (v.norm() * g.norm());
    r.zero_mode_angle = std::acos(std::min(1.0, c));

    struct Entry {
        cd value;
        ModeKind kind;
    };
    std::vector<Entry> all;
    for (Idx k = 0; k < nd; ++k) all.push_back({lam[k], k == zmin ? ModeKind::zero_mode : ModeKind::dynamic});
    for (Idx k = 0; k < model.kcl_matrix().rows(); ++k) all.push_back({cd(0.0, 0.0), ModeKind::kcl_invariant});
    std::stable_sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) {
        if (a.value.real() != b.value.real()) return a.value.real() > b.value.real();
        return a.value.imag() > b.value.imag();
    });
    r.spectral_abscissa_excl = -INFINITY;
    for (std::size_t k = 0; k < all.size(); ++k) {
        r.eigenvalues.push_back(all[k].value);
        r.kinds.push_back(all[k].kind);
        if (all[k].kind == ModeKind::zero_mode) r.zero_mode_index = k;
        if (all[k].kind == ModeKind::dynamic)
            r.spectral_abscissa_excl = std::max(r.spectral_abscissa_excl, all[k].value.real());
    }
    return r;
}

DiagnosticSample state_diagnostics(const ReducedModel& model, const Vector& x, double t) {
    const auto& L = model.layout();
    const auto& topo = model.topology();
    DiagnosticSample d;
    d.t = t;
    const Vector kcl = model.kcl_residual(x);
    const Idx nb = ix(topo.n_bus());
    d.kcl_residual_d = kcl.head(nb).lpNorm<Eigen::Infinity>();
    d.kcl_residual_q = kcl.tail(nb).lpNorm<Eigen::Infinity>();
    using S = ConverterSymbol;
    for (std::size_t i = 0; i < L.n_converters(); ++i) {
        const double vd = x[ix(L.converter(S::v_od, i))], vq = x[ix(L.converter(S::v_oq, i))];
        const double id = x[ix(L.converter(S::i_od, i))], iq = x[ix(L.converter(S::i_oq, i))];
        d.total_gen_p += vd * id + vq * iq;
        d.coupling_loss_p += topo.converters[i].params.r_c * (id * id + iq * iq);
    }
    for (std::size_t l = 0; l < L.n_loads(); ++l) {
        const double id = x[ix(L.load_d(l))], iq = x[ix(L.load_q(l))];
        d.total_load_p += model.load_params()[l].r_L * (id * id + iq * iq);
    }
    for (std::size_t k = 0; k < L.n_branches(); ++k) {
        const double id = x[ix(L.branch_d(k))], iq = x[ix(L.branch_q(k))];
        d.branch_loss_p += topo.branches[k].params.r_B * (id * id + iq * iq);
    }
    d.total_loss_p = d.branch_loss_p + d.coupling_loss_p;
    return d;
}

std::vector<DiagnosticSample> trajectory_diagnostics(const Trajectory& traj, const ReducedModel& model) {
    std::vector<DiagnosticSample> out;
    out.reserve(traj.times.size());
    for (std::size_t k = 0; k < traj.times.size(); ++k) out.push_back(state_diagnostics(model, traj.states[k], traj.times[k]));
    return out;
}

Vector converter_frequencies(const ReducedModel& model, const Vector& x, const Exogenous& exo, const ControlInput& u) {
    const auto alg = reconstruct_algebraics(converter_states(model.layout(), x), model.topology(), exo, u);
    Vector w(ix(alg.size()));
    for (std::size_t i = 0; i < alg.size(); ++i) w[ix(i)] = alg[i].omega;
    return w;
}

void write_eigen_csv(const std::filesystem::path& path, const SmallSignalResult& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "re,im,kind\n";
    for (std::size_t k = 0; k < r.eigenvalues.size(); ++k)
        out << csv::format17(r.eigenvalues[k].real()) << ',' << csv::format17(r.eigenvalues[k].imag()) << ','
            << to_string(r.kinds[k]) << '\n';
}

void write_diagnostics_csv(const std::filesystem::path& path, const std::vector<DiagnosticSample>& d) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "t,kcl_residual_d,kcl_residual_q,total_gen_p,total_load_p,total_loss_p,branch_loss_p,coupling_loss_p\n";
    for (const auto& s : d)
        out << csv::format17(s.t) << ',' << csv::format17(s.kcl_residual_d) << ',' << csv::format17(s.kcl_residual_q)
            << ',' << csv::format17(s.total_gen_p) << ',' << csv::format17(s.total_load_p) << ','
            << csv::format17(s.total_loss_p) << ',' << csv::format17(s.branch_loss_p) << ','
            << csv::format17(s.coupling_loss_p) << '\n';
}

}  // namespace mgsim
