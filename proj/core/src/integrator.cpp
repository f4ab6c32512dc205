#include "mgsim/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <Eigen/LU>

#include "mgsim/csv.hpp"
#include "mgsim/equilibrium.hpp"
#include "mgsim/errors.hpp"

namespace mgsim {

namespace {

using Idx = Eigen::Index;

Idx ix(std::size_t i) { return static_cast<Idx>(i); }

// Shared pieces of one integration run.
struct Run {
    const OdeSystem& sys;
    const IntegratorConfig& cfg;
    OdeSolution& out;
    const StepObserver& observer;
    std::size_t next_sample = 0;

    Vector f(const Vector& x, const ControlInput& u) {
        ++out.rhs_evaluations;
        return sys.rhs(x, u);
    }

    void record(double t, const Vector& x) {
        out.times.push_back(t);
        out.states.push_back(x);
    }

    void accepted(double t, const Vector& x) {
        ++out.accepted_steps;
        out.step_times.push_back(t);
        if (observer) observer(t, x);
    }

    // Emit requested samples in (t0, t1] by cubic Hermite interpolation.
    void emit(double t0, const Vector& x0, const Vector& f0, double t1, const Vector& x1, const Vector& f1) {
        const auto& st = cfg.sample_times;
        const double h = t1 - t0;
        while (next_sample < st.size() && st[next_sample] <= t1) {
            const double s = st[next_sample++];
            if (s == t1) {
                record(s, x1);
                continue;
            }
            if (s <= t0) {
                record(s, x0);
                continue;
            }
            const double th = (s - t0) / h;
            const double th2 = th * th, th3 = th2 * th;
            const double h00 = 2 * th3 - 3 * th2 + 1, h10 = th3 - 2 * th2 + th;
            const double h01 = -2 * th3 + 3 * th2, h11 = th3 - th2;
            record(s, h00 * x0 + h10 * h * f0 + h01 * x1 + h11 * h * f1);
        }
    }

    void emit_start(const Vector& x0) {
        const auto& st = cfg.sample_times;
        if (st.empty()) {
            record(0.0, x0);
            return;
        }
        while (next_sample < st.size() && st[next_sample] <= 0.0) record(st[next_sample++], x0);
    }
};

// Breakpoints in (0, horizon]: control switches and the horizon itself.
std::vector<double> breakpoints(const ControlSchedule& u, double horizon) {
    std::vector<double> bp;
    for (double t : u.times)
        if (t > 0.0 && t < horizon) bp.push_back(t);
    bp.push_back(horizon);
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
    return bp;
}

class Trapezoidal {
public:
    explicit Trapezoidal(Run& run) : run_(run) {}

    OdeSolution& solve(const Vector& x0, const ControlSchedule& sched) {
        const auto& cfg = run_.cfg;
        const auto bps = breakpoints(sched, cfg.horizon);
        double t = 0.0;
        Vector x = x0;
        const ControlInput* u = &sched.at(0.0);
        Vector fx = run_.f(x, *u);
        run_.emit_start(x);
        if (cfg.horizon == 0.0) return run_.out;

        double h = cfg.dt_initial;
        std::size_t bp = 0;
        while (bp < bps.size()) {
            const double target = bps[bp];
            bool hit = false;
            double step = h;
            if (t + step >= target || target - (t + step) < 1e-12 * std::max(1.0, target)) {
                step = target - t;
                hit = true;
            }

            Vector ym, fym, y2, fy2, y1, fy1;
            bool ok = newton_with_retry(x, fx, step, *u, y1, fy1) &&
                      newton_with_retry(x, fx, 0.5 * step, *u, ym, fym) &&
                      newton_with_retry(ym, fym, 0.5 * step, *u, y2, fy2);
            if (!ok) {
                ++run_.out.rejected_steps;
                h = 0.25 * step;
                if (h < cfg.dt_min)
                    throw StepSizeError("Newton iteration failed with step below dt_min at t = " +
                                            csv::format_shortest(t),
                                        t);
                continue;
            }

            double err = 0.0;
            for (Idx i = 0; i < x.size(); ++i) {
                const double w = cfg.atol + cfg.rtol * std::max(std::abs(x[i]), std::abs(y2[i]));
                err = std::max(err, std::abs(y2[i] - y1[i]) / 3.0 / w);
            }
            double factor = err > 0.0 ? 0.9 * std::pow(err, -1.0 / 3.0) : 4.0;
            factor = std::clamp(factor, 0.2, 4.0);

            if (err > 1.0) {
                ++run_.out.rejected_steps;
                if (step <= cfg.dt_min)
                    throw StepSizeError("step size underflow at t = " + csv::format_shortest(t) +
                                            " (error ratio " + csv::format_shortest(err) + ")",
                                        t);
                h = std::max(step * factor, cfg.dt_min);
                continue;
            }

            const double tm = t + 0.5 * step;
            const double t1 = hit ? target : t + step;
            if (cfg.sample_times.empty()) {
                run_.record(t1, y2);
            } else {
                run_.emit(t, x, fx, tm, ym, fym);
                run_.emit(tm, ym, fym, t1, y2, fy2);
            }
            run_.accepted(t1, y2);

            t = t1;
            x = std::move(y2);
            fx = std::move(fy2);
            // small growth keeps the factorisation reusable
            if (!(factor > 1.0 && factor < 1.2)) h = step * factor;
            else h = step;
            h = std::min(h, cfg.dt_max);
            if (hit) {
                ++bp;
                const ControlInput* un = &sched.at(t);
                if (un != u) {
                    u = un;
                    fx = run_.f(x, *u);
                    jac_valid_ = false;
                }
            }
        }
        return run_.out;
    }

private:
    bool newton_with_retry(const Vector& x, const Vector& fx, double h, const ControlInput& u, Vector& y,
                           Vector& fy) {
        if (!jac_valid_) refresh_jacobian(x, fx, u);
        if (newton(x, fx, h, u, y, fy)) return true;
        if (jac_fresh_) return false;
        refresh_jacobian(x, fx, u);
        return newton(x, fx, h, u, y, fy);
    }

    void refresh_jacobian(const Vector& x, const Vector& fx, const ControlInput& u) {
        const Idx n = x.size();
        J_.resize(n, n);
        const Vector typ = run_.sys.scale ? run_.sys.scale(x) : Vector::Ones(n);
        Vector xp = x;
        for (Idx j = 0; j < n; ++j) {
            const double hj = 1e-8 * std::max(std::abs(x[j]), typ[j]);
            xp[j] = x[j] + hj;
            const double step = xp[j] - x[j];
            J_.col(j) = (run_.f(xp, u) - fx) / step;
            xp[j] = x[j];
        }
        ++run_.out.jacobian_updates;
        jac_valid_ = true;
        jac_fresh_ = true;
        lu_h_[0] = lu_h_[1] = -1.0;
    }

    const Eigen::PartialPivLU<Matrix>& factor(double h) {
        for (int k = 0; k < 2; ++k)
            if (lu_h_[k] == h) return lu_[k];
        const int k = next_slot_;
        next_slot_ = 1 - next_slot_;
        const Idx n = J_.rows();
        lu_[k].compute(Matrix::Identity(n, n) - 0.5 * h * J_);
        lu_h_[k] = h;
        return lu_[k];
    }

    bool newton(const Vector& x, const Vector& fx, double h, const ControlInput& u, Vector& y, Vector& fy) {
        const auto& cfg = run_.cfg;
        const auto& lu = factor(h);
        y = x;
        fy = fx;
        double prev = std::numeric_limits<double>::infinity();
        for (int it = 0; it < 10; ++it) {
            const Vector r = y - x - 0.5 * h * (fx + fy);
            const Vector d = lu.solve(-r);
            y += d;
            bool finite = d.allFinite();
            if (finite) {
                try {
                    fy = run_.f(y, u);
                } catch (const NumericalError&) {
                    finite = false;
                }
            }
            if (!finite) return false;
            double norm = 0.0;
            for (Idx i = 0; i < y.size(); ++i)
                norm = std::max(norm, std::abs(d[i]) / (cfg.atol + cfg.rtol * std::abs(y[i])));
            if (norm <= 1e-3) {
                jac_fresh_ = false;
                if (it >= 4) jac_valid_ = false;  // slow: refresh before the next solve
                return true;
            }
            if (it >= 2 && norm > prev) return false;
            prev = norm;
        }
        return false;
    }

    Run& run_;
    Matrix J_;
    bool jac_valid_ = false, jac_fresh_ = false;
    Eigen::PartialPivLU<Matrix> lu_[2];
    double lu_h_[2] = {-1.0, -1.0};
    int next_slot_ = 0;
};

OdeSolution& rk4(Run& run, const Vector& x0, const ControlSchedule& sched) {
    const auto& cfg = run.cfg;
    std::vector<double> events = breakpoints(sched, cfg.horizon);
    for (double s : cfg.sample_times)
        if (s > 0.0 && s < cfg.horizon) events.push_back(s);
    std::sort(events.begin(), events.end());
    events.erase(std::unique(events.begin(), events.end()), events.end());

    Vector x = x0;
    const ControlInput* u = &sched.at(0.0);
    run.emit_start(x);
    if (cfg.horizon == 0.0) return run.out;
    double a = 0.0;
    for (double b : events) {
        // equal substeps that land exactly on b
        const auto n = static_cast<long long>(std::ceil((b - a) / cfg.dt_initial - 1e-9));
        const double dt = (b - a) / static_cast<double>(std::max(1LL, n));
        for (long long k = 0; k < std::max(1LL, n); ++k) {
            const Vector k1 = run.f(x, *u);
            const Vector k2 = run.f(x + 0.5 * dt * k1, *u);
            const Vector k3 = run.f(x + 0.5 * dt * k2, *u);
            const Vector k4 = run.f(x + dt * k3, *u);
            x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            ++run.out.accepted_steps;
            if (run.observer) run.observer(a + dt * static_cast<double>(k + 1), x);
        }
        if (!x.allFinite()) throw StepSizeError("RK4 reference diverged before t = " + csv::format_shortest(b), b);
        a = b;
        const auto& st = cfg.sample_times;
        if (st.empty()) {
            if (b == cfg.horizon) run.record(b, x);
        } else {
            while (run.next_sample < st.size() && st[run.next_sample] <= b) run.record(st[run.next_sample++], x);
        }
        u = &sched.at(b);
    }
    return run.out;
}

}  // namespace

void IntegratorConfig::validate() const {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw InputError("rtol and atol must be positive");
    if (!(dt_min > 0.0 && dt_min <= dt_initial && dt_initial <= dt_max))
        throw InputError("step bounds must satisfy 0 < dt_min <= dt_initial <= dt_max");
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw InputError("horizon must be finite and non-negative");
    for (std::size_t k = 0; k < sample_times.size(); ++k) {
        if (sample_times[k] < 0.0 || sample_times[k] > horizon)
            throw InputError("sample time outside [0, horizon]");
        if (k && !(sample_times[k] > sample_times[k - 1])) throw InputError("sample times must increase strictly");
    }
}

ControlSchedule ControlSchedule::constant(const ControlInput& u) { return {{0.0}, {u}}; }

const ControlInput& ControlSchedule::at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    const auto k = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin() - 1);
    return inputs[k];
}

ControlSchedule ControlSchedule::load_csv(const std::filesystem::path& path, const GridTopology& topology) {
    const auto t = csv::read(path);
    if (t.header.empty() || t.header[0] != "t_s") throw ParseError(path.string() + ": first column must be t_s");
    const auto nC = topology.n_converters();
    std::vector<std::size_t> cp(nC), cq(nC);
    for (std::size_t i = 0; i < nC; ++i) {
        cp[i] = t.column("up_" + topology.converters[i].id);
        cq[i] = t.column("uq_" + topology.converters[i].id);
        if (cp[i] == csv::Table::npos || cq[i] == csv::Table::npos)
            throw ParseError(path.string() + ": missing up_/uq_ column for " + topology.converters[i].id);
    }
    ControlSchedule s;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string ctx = path.string() + ":" + std::to_string(t.line_numbers[r]);
        const double time = csv::parse_double(t.rows[r][0], ctx + " t_s");
        if (!s.times.empty() && !(time > s.times.back()))
            throw ValidationError(ctx + ": non-monotonic control time");
        ControlInput u = ControlInput::zeros(nC);
        for (std::size_t i = 0; i < nC; ++i) {
            u.u_p[ix(i)] = csv::parse_double(t.rows[r][cp[i]], ctx);
            u.u_q[ix(i)] = csv::parse_double(t.rows[r][cq[i]], ctx);
        }
        s.times.push_back(time);
        s.inputs.push_back(u);
    }
    if (s.times.empty() || s.times.front() > 0.0) {
        s.times.insert(s.times.begin(), 0.0);
        s.inputs.insert(s.inputs.begin(), ControlInput::zeros(nC));
    }
    return s;
}

OdeSolution integrate_ode(const OdeSystem& system, const Vector& x0, const ControlSchedule& u,
                          const IntegratorConfig& cfg, const StepObserver& observer) {
    cfg.validate();
    if (!x0.allFinite()) throw InputError("initial state is not finite");
    if (u.times.empty() || u.times.size() != u.inputs.size()) throw InputError("empty control schedule");
    OdeSolution out;
    Run run{system, cfg, out, observer};
    if (cfg.method == Method::explicit_rk4_reference) return std::move(rk4(run, x0, u));
    Trapezoidal trap(run);
    return std::move(trap.solve(x0, u));
}

Trajectory integrate(const ReducedModel& model, const Vector& x0, const Exogenous& exo, const ControlSchedule& u,
                     const IntegratorConfig& cfg) {
    if (x0.size() != ix(model.size())) throw InputError("initial state has wrong dimension");
    const auto& L = model.layout();
    OdeSystem sys;
    sys.rhs = [&](const Vector& x, const ControlInput& uu) {
        Vector dx = model.ode_rhs(x, exo, uu);
        if (cfg.frame_omega != 0.0) dx -= cfg.frame_omega * rotation_generator(L, x);
        return dx;
    };
    sys.scale = [&](const Vector& x) { return block_scale(L, x, 1.0); };

    Trajectory traj;
    traj.frame_omega = cfg.frame_omega;
    auto observer = [&](double, const Vector& x) {
        if (cfg.method == Method::implicit_trapezoidal)
            traj.step_kcl_max.push_back(model.kcl_residual(x).lpNorm<Eigen::Infinity>());
    };
    auto sol = integrate_ode(sys, x0, u, cfg, observer);
    traj.times = std::move(sol.times);
    traj.states = std::move(sol.states);
    traj.accepted_steps = sol.accepted_steps;
    traj.rejected_steps = sol.rejected_steps;
    traj.rhs_evaluations = sol.rhs_evaluations;
    traj.jacobian_updates = sol.jacobian_updates;
    traj.step_times = std::move(sol.step_times);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        traj.bus_voltages.push_back(model.solve_bus_voltages(traj.states[k]));
        if (cfg.record_algebraics)
            traj.algebraics.push_back(
                reconstruct_algebraics(converter_states(L, traj.states[k]), model.topology(), exo, u.at(traj.times[k])));
    }
    return traj;
}

Trajectory integrate(const ReducedModel& model, const Vector& x0, const Exogenous& exo, const ControlInput& u,
                     const IntegratorConfig& cfg) {
    return integrate(model, x0, exo, ControlSchedule::constant(u), cfg);
}

StepResponse simulate_step_response(const ReducedModel& model_before, const ReducedModel& model_after,
                                    const Exogenous& exo_before, const Exogenous& exo_after, const ControlInput& u,
                                    IntegratorConfig cfg, bool use_initial_frame) {
    const auto eq = find_equilibrium(model_before, exo_before, u);
    if (use_initial_frame) cfg.frame_omega = eq.omega_dev;
    StepResponse r;
    r.x_before = eq.x_eq;
    r.omega_dev_before = eq.omega_dev;
    r.trajectory = integrate(model_after, eq.x_eq, exo_after, u, cfg);
    return r;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj, const ReducedModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    const auto& topo = model.topology();
    out << 't';
    for (const auto& l : model.layout().labels(topo)) out << ',' << l;
    for (int b : topo.bus_ids) out << ",vBd_" << b;
    for (int b : topo.bus_ids) out << ",vBq_" << b;
    out << '\n';
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        out << csv::format17(traj.times[k]);
        for (Idx i = 0; i < traj.states[k].size(); ++i) out << ',' << csv::format17(traj.states[k][i]);
        for (Idx i = 0; i < traj.bus_voltages[k].v_Bd.size(); ++i) out << ',' << csv::format17(traj.bus_voltages[k].v_Bd[i]);
        for (Idx i = 0; i < traj.bus_voltages[k].v_Bq.size(); ++i) out << ',' << csv::format17(traj.bus_voltages[k].v_Bq[i]);
        out << '\n';
    }
}

std::vector<double> uniform_samples(double horizon, std::size_t n) {
    std::vector<double> s(n + 1);
    for (std::size_t k = 0; k <= n; ++k) s[k] = horizon * static_cast<double>(k) / static_cast<double>(n);
    s[n] = horizon;
    return s;
}

}  // namespace mgsim
