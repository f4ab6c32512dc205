#include "mgsim/equilibrium.hpp"

#include <cmath>
#include <complex>
#include <limits>

#include <Eigen/LU>
#include <Eigen/QR>

#include "mgsim/errors.hpp"

namespace mgsim {

namespace {

using Idx = Eigen::Index;
using cd = std::complex<double>;

Idx ix(std::size_t i) { return static_cast<Idx>(i); }

}  // namespace

Vector flat_start(const ReducedModel& model, const Exogenous& exo) {
    const auto& t = model.topology();
    const auto& L = model.layout();
    const double wn = model.omega_n();
    const Idx nb = ix(t.n_bus());
    const cd j(0.0, 1.0);

    Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(nb, nb);
    Eigen::VectorXcd inj = Eigen::VectorXcd::Zero(nb);
    for (std::size_t i = 0; i < t.n_converters(); ++i) {
        const auto& p = t.converters[i].params;
        const cd y = 1.0 / cd(p.r_c, wn * p.L_c);
        const Idx b = model.converter_bus()[i];
        Y(b, b) += y;
        inj[b] += y * exo.U_star[ix(i)];
    }
    for (std::size_t l = 0; l < t.n_loads(); ++l) {
        const auto& p = model.load_params()[l];
        const Idx b = model.load_bus()[l];
        Y(b, b) += 1.0 / cd(p.r_L, wn * p.L_L);
    }
    for (const auto& br : t.branches) {
        const cd y = 1.0 / cd(br.params.r_B, wn * br.params.L_B);
        const Idx a = ix(t.bus_index(br.from_bus)), c = ix(t.bus_index(br.to_bus));
        Y(a, a) += y;
        Y(c, c) += y;
        Y(a, c) -= y;
        Y(c, a) -= y;
    }
    const Eigen::VectorXcd vb = Y.partialPivLu().solve(inj);

    Vector x = Vector::Zero(ix(L.size()));
    for (std::size_t i = 0; i < t.n_converters(); ++i) {
        const auto& p = t.converters[i].params;
        const Idx k = ix(i);
        const cd vo = exo.U_star[k];
        const cd io = (vo - vb[model.converter_bus()[i]]) / cd(p.r_c, wn * p.L_c);
        const cd il = io + j * wn * p.C_f * vo;
        ConverterState s;
        s.delta = 0.0;
        s.P = exo.P_star[k] + exo.xi[k];
        s.Q = exo.Q_star[k];
        s.v_od = vo.real();
        s.v_oq = vo.imag();
        s.i_od = io.real();
        s.i_oq = io.imag();
        s.i_ld = il.real();
        s.i_lq = il.imag();
        // zero voltage-loop error: i_l* = i_l
        s.phi_d = (s.i_ld - p.F * s.i_od + wn * p.C_f * s.v_oq) / p.K_iv;
        s.phi_q = (s.i_lq - p.F * s.i_oq - wn * p.C_f * s.v_od) / p.K_iv;
        // zero current-loop error and di_l/dt = 0
        s.gamma_d = (p.r_f * s.i_ld + s.v_od) / p.K_ic;
        s.gamma_q = (p.r_f * s.i_lq + s.v_oq) / p.K_ic;
        store_converter_state(L, i, s, x);
    }
    for (std::size_t l = 0; l < t.n_loads(); ++l) {
        const auto& p = model.load_params()[l];
        const cd i = vb[model.load_bus()[l]] / cd(p.r_L, wn * p.L_L);
        x[ix(L.load_d(l))] = i.real();
        x[ix(L.load_q(l))] = i.imag();
    }
    for (std::size_t k = 0; k < t.n_branches(); ++k) {
        const auto& br = t.branches[k];
        const cd dv = vb[ix(t.bus_index(br.from_bus))] - vb[ix(t.bus_index(br.to_bus))];
        const cd i = dv / cd(br.params.r_B, wn * br.params.L_B);
        x[ix(L.branch_d(k))] = i.real();
        x[ix(L.branch_q(k))] = i.imag();
    }
    return x;
}

Vector equilibrium_residual(const ReducedModel& model, const Vector& x, double omega_dev, const Exogenous& exo,
                            const ControlInput& u) {
    return model.ode_rhs(x, exo, u) - omega_dev * rotation_generator(model.layout(), x);
}

Vector align_rotation(const ReducedModel& model, const Vector& x, double angle) {
    const auto ref = model.topology().reference_converter();
    const double delta_ref = x[ix(model.layout().converter(ConverterSymbol::delta, ref))];
    return rotate_state(model.layout(), x, angle - delta_ref);
}

std::vector<Idx> redundant_current_rows(const ReducedModel& model) {
    const auto& L = model.layout();
    const auto& C = model.kcl_matrix();
    const Idx nb = ix(model.topology().n_bus());

    std::vector<Idx> d_cols, q_cols;
    for (std::size_t i = 0; i < L.n_converters(); ++i) {
        d_cols.push_back(ix(L.converter(ConverterSymbol::i_od, i)));
        q_cols.push_back(ix(L.converter(ConverterSymbol::i_oq, i)));
    }
    for (std::size_t l = 0; l < L.n_loads(); ++l) {
        d_cols.push_back(ix(L.load_d(l)));
        q_cols.push_back(ix(L.load_q(l)));
    }
    for (std::size_t k = 0; k < L.n_branches(); ++k) {
        d_cols.push_back(ix(L.branch_d(k)));
        q_cols.push_back(ix(L.branch_q(k)));
    }
    Matrix Cd(nb, ix(d_cols.size()));
    for (std::size_t c = 0; c < d_cols.size(); ++c) Cd.col(ix(c)) = C.col(d_cols[c]).head(nb);
    Eigen::ColPivHouseholderQR<Matrix> qr(Cd);
    if (qr.rank() != nb) throw NumericalError("KCL matrix is rank deficient; grid has an unanchored island");
    std::vector<Idx> rows;
    const auto& perm = qr.colsPermutation().indices();
    for (Idx k = 0; k < nb; ++k) rows.push_back(d_cols[static_cast<std::size_t>(perm[k])]);
    for (Idx k = 0; k < nb; ++k) rows.push_back(q_cols[static_cast<std::size_t>(perm[k])]);
    return rows;
}

EquilibriumResult find_equilibrium(const ReducedModel& model, const Exogenous& exo, const ControlInput& u,
                                   const std::optional<Vector>& guess, const EquilibriumOptions& options) {
    const auto& L = model.layout();
    const Idx n = ix(L.size());
    const Idx ref = ix(L.converter(ConverterSymbol::delta, model.topology().reference_converter()));
    const auto replaced = redundant_current_rows(model);
    const Matrix& C = model.kcl_matrix();

    Vector y(n + 1);
    if (guess) {
        if (guess->size() != n) throw InputError("equilibrium guess has wrong dimension");
        y.head(n) = align_rotation(model, *guess, options.reference_angle);
    } else {
        y.head(n) = flat_start(model, exo);
        y.head(n) = align_rotation(model, y.head(n), options.reference_angle);
    }
    y[n] = 0.0;

    Vector typ(n + 1);
    typ.head(n) = block_scale(L, y.head(n), 1.0);
    for (std::size_t i = 0; i < L.n_converters(); ++i) typ[ix(L.converter(ConverterSymbol::delta, i))] = 1.0;
    typ[n] = 1.0;

    Vector raw(n);
    auto system = [&](const Vector& yy, Vector& out) {
        const Vector x = yy.head(n);
        if (options.co_rotating) {
            raw = model.ode_rhs(x, exo, u) - yy[n] * rotation_generator(L, x);
        } else {
            raw = model.ode_rhs(x, exo, u);
            raw.segment(ix(L.block(ConverterSymbol::delta)), ix(L.n_converters())).array() -= yy[n];
        }
        out.resize(n + 1);
        out.head(n) = raw;
        const Vector kcl = C * x;
        for (std::size_t k = 0; k < replaced.size(); ++k) out[replaced[k]] = kcl[ix(k)];
        out[n] = x[ref] - options.reference_angle;
    };

    Vector F(n + 1), Fp(n + 1), row_scale;
    Matrix J(n + 1, n + 1);
    bool polished = false;
    double last_step = std::numeric_limits<double>::infinity();
    double raw_norm = 0.0;

    for (int it = 0; it <= options.max_iterations; ++it) {
        system(y, F);
        raw_norm = raw.lpNorm<Eigen::Infinity>();
        const double scale = std::max(1.0, y.head(n).lpNorm<Eigen::Infinity>());
        const double tol = options.tolerance * scale;
        const double kcl_norm = (C * y.head(n)).lpNorm<Eigen::Infinity>();
        if (raw_norm <= tol && kcl_norm <= tol && std::abs(F[n]) <= tol) {
            if (polished || last_step < 1e-12) {
                EquilibriumResult res;
                // Newton leaves delta_ref within tolerance; pin it exactly
                res.x_eq = align_rotation(model, y.head(n), options.reference_angle);
                res.omega_dev = y[n];
                res.omega_sync = exo.omega_ref + y[n];
                res.residual_norm = raw_norm;
                res.iterations = it;
                return res;
            }
            // one extra step drives the residual to roundoff level
            polished = true;
        }
        if (it == options.max_iterations) break;

        for (Idx c = 0; c <= n; ++c) {
            const double h = 1e-7 * std::max(std::abs(y[c]), typ[c]);
            Vector yp = y;
            yp[c] += h;
            system(yp, Fp);
            J.col(c) = (Fp - F) / h;
        }
        if (row_scale.size() == 0) {
            row_scale = (J.cwiseAbs() * typ.asDiagonal()).rowwise().maxCoeff();
            for (Idx r = 0; r <= n; ++r)
                if (!(row_scale[r] > 0.0)) row_scale[r] = 1.0;
        }
        const Eigen::PartialPivLU<Matrix> lu(J);
        const Vector step = lu.solve(-F);
        if (!step.allFinite()) throw ConvergenceError("equilibrium Newton step is not finite", raw_norm);

        const double merit = F.cwiseQuotient(row_scale).lpNorm<Eigen::Infinity>();
        double lambda = 1.0;
        Vector trial(n + 1);
        while (true) {
            trial = y + lambda * step;
            bool ok = true;
            try {
                system(trial, Fp);
            } catch (const NumericalError&) {
                ok = false;
            }
            if (ok && Fp.cwiseQuotient(row_scale).lpNorm<Eigen::Infinity>() <= (1.0 - 1e-4 * lambda) * merit) break;
            lambda *= 0.5;
            if (lambda < 1.0 / 1024.0) break;
        }
        y = trial;
        last_step = (lambda * step).cwiseQuotient(typ).lpNorm<Eigen::Infinity>();
    }
    throw ConvergenceError("equilibrium Newton did not converge in " + std::to_string(options.max_iterations) +
                               " iterations; last residual " + std::to_string(raw_norm),
                           raw_norm);
}

Exogenous consistent_setpoints(const ReducedModel& model, const Exogenous& exo, const ControlInput& u,
                               const std::optional<Vector>& guess) {
    EquilibriumOptions opt;
    opt.co_rotating = false;
    const auto eq = find_equilibrium(model, exo, u, guess, opt);
    Exogenous out = exo;
    for (std::size_t i = 0; i < model.topology().n_converters(); ++i)
        out.P_star[ix(i)] -= eq.omega_dev / model.topology().converters[i].params.K_p;
    return out;
}

}  // namespace mgsim
