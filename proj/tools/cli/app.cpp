#include "app.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "manifest.hpp"
#include "mgsim/analysis.hpp"
#include "mgsim/csv.hpp"
#include "mgsim/equilibrium.hpp"
#include "mgsim/errors.hpp"
#include "mgsim/integrator.hpp"
#include "mgsim/scenario.hpp"
#include "svg.hpp"

#ifndef MGSIM_SAMPLE_DIR
#define MGSIM_SAMPLE_DIR ""
#endif

namespace mgsim::cli {

namespace {

namespace fs = std::filesystem;
using Idx = Eigen::Index;

Idx ix(std::size_t i) { return static_cast<Idx>(i); }

struct Globals {
    std::string topology;
    std::string scenario;
    std::string out_dir = ".";
    std::optional<double> omega_ref;
    std::optional<double> v_nominal;
    double rtol = 1e-6;
    double atol = 1e-9;
    unsigned seed = 0;
};

struct Inputs {
    std::shared_ptr<const GridTopology> topology;
    ScenarioSeries series;
    double omega_ref = 0.0;
};

std::shared_ptr<const GridTopology> read_topology(const Globals& g, Manifest* m) {
    if (g.topology.empty()) {
        auto t = std::make_shared<GridTopology>(default_topology());
        if (m) m->input_bytes("topology", "builtin:default", serialize_topology(*t));
        return t;
    }
    auto t = std::make_shared<GridTopology>(load_topology(g.topology));
    if (m) m->input("topology", g.topology);
    return t;
}

fs::path scenario_dir(const Globals& g) {
    if (!g.scenario.empty()) return g.scenario;
    const fs::path bundled = MGSIM_SAMPLE_DIR;
    if (bundled.empty() || !fs::exists(bundled / "loads.csv"))
        throw InputError("no --scenario given and the bundled sample is not available");
    return bundled;
}

Inputs read_inputs(const Globals& g, Manifest* m) {
    Inputs in;
    in.topology = read_topology(g, m);
    const auto dir = scenario_dir(g);
    in.series = load_scenario(dir, *in.topology);
    if (m)
        for (const char* f : {"loads.csv", "setpoints_p.csv", "setpoints_qu.csv", "xi.csv"}) m->input("scenario", dir / f);
    in.omega_ref = g.omega_ref.value_or(network_omega(*in.topology));
    return in;
}

void echo_config(Manifest& m, const Globals& g, const Inputs& in) {
    m.config()["topology"] = g.topology.empty() ? "builtin:default" : g.topology;
    m.config()["scenario"] = scenario_dir(g).string();
    m.config()["omega_ref"] = in.omega_ref;
    if (g.v_nominal) m.config()["v_nominal"] = *g.v_nominal;
    else m.config()["v_nominal"] = nullptr;
    m.config()["rtol"] = g.rtol;
    m.config()["atol"] = g.atol;
    m.config()["seed"] = g.seed;
}

fs::path prepare_out(const Globals& g) {
    fs::path out = g.out_dir;
    fs::create_directories(out);
    return out;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InputError("cannot write " + p.string());
    return out;
}

std::string f17(double v) { return csv::format17(v); }

std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

void print_warnings(const ScenarioPoint& p) {
    for (const auto& w : p.warnings) std::cerr << "warning: " << w << '\n';
}

// (P_i - P*_i - xi_i) K_p,i for every converter.
Vector droop_terms(const GridTopology& topo, const StateLayout& L, const Vector& x, const Exogenous& exo) {
    Vector a(ix(topo.n_converters()));
    for (std::size_t i = 0; i < topo.n_converters(); ++i)
        a[ix(i)] = (x[ix(L.converter(ConverterSymbol::P, i))] - exo.P_star[ix(i)] - exo.xi[ix(i)]) *
                   topo.converters[i].params.K_p;
    return a;
}

double relative_spread(const Vector& a) {
    const double hi = a.maxCoeff(), lo = a.minCoeff();
    const double den = std::max(std::abs(hi), std::abs(lo));
    return den > 0.0 ? (hi - lo) / den : 0.0;
}

std::vector<double> column(const csv::Table& t, const std::string& name) {
    const auto c = t.column(name);
    if (c == csv::Table::npos) throw InputError(t.path.string() + ": missing column " + name);
    std::vector<double> v;
    for (const auto& r : t.rows) v.push_back(csv::parse_double(r[c], t.path.string()));
    return v;
}

std::vector<double> scaled(std::vector<double> v, double s) {
    for (double& x : v) x *= s;
    return v;
}

// ---------------------------------------------------------------- validate

int cmd_validate(const Globals& g) {
    int findings = 0;
    std::shared_ptr<const GridTopology> topo;
    try {
        topo = read_topology(g, nullptr);
        std::cout << "topology ok: " << topo->n_bus() << " buses, " << topo->n_branches() << " branches, "
                  << topo->n_converters() << " converters, " << topo->n_loads() << " loads\n";
    } catch (const InputError& e) {
        std::cout << "error: topology: " << e.what() << '\n';
        return 1;
    }
    try {
        const auto dir = scenario_dir(g);
        const auto s = load_scenario(dir, *topo);
        std::size_t warnings = 0;
        const double wref = g.omega_ref.value_or(network_omega(*topo));
        for (long long t : s.timestamps) {
            const auto p = point_at(s, *topo, static_cast<double>(t), wref);
            for (const auto& w : p.warnings) std::cout << "warning: " << w << '\n';
            warnings += p.warnings.size();
        }
        std::cout << "scenario ok: " << s.size() << " points from " << dir.string() << " (" << warnings
                  << " limit warnings)\n";
    } catch (const InputError& e) {
        std::cout << "error: scenario: " << e.what() << '\n';
        ++findings;
    }
    return findings ? 1 : 0;
}

// ------------------------------------------------------------- equilibrium

int cmd_equilibrium(const Globals& g, double at, bool debug) {
    Manifest m("equilibrium");
    const auto in = read_inputs(g, &m);
    echo_config(m, g, in);
    m.options()["at"] = at;
    m.options()["debug_matrices"] = debug;
    const auto out = prepare_out(g);

    const auto pt = point_at(in.series, *in.topology, at, in.omega_ref);
    print_warnings(pt);
    const ReducedModel model(in.topology, pt.loads);
    const auto u = ControlInput::zeros(in.topology->n_converters());
    const auto eq = find_equilibrium(model, pt.exo, u);
    const auto& L = model.layout();
    const auto& topo = *in.topology;

    {
        auto f = open_out(out / "equilibrium.csv");
        f << "label,value\n";
        const auto labels = L.labels(topo);
        for (std::size_t i = 0; i < labels.size(); ++i) f << labels[i] << ',' << f17(eq.x_eq[ix(i)]) << '\n';
        m.output(out / "equilibrium.csv");
    }
    const Vector w = converter_frequencies(model, eq.x_eq, pt.exo, u);
    const Vector droop = droop_terms(topo, L, eq.x_eq, pt.exo);
    {
        auto f = open_out(out / "converters.csv");
        f << "converter,bus,P,Q,omega,P_star,Q_star,U_star,xi,droop_term\n";
        for (std::size_t i = 0; i < topo.n_converters(); ++i)
            f << topo.converters[i].id << ',' << topo.converters[i].bus << ','
              << f17(eq.x_eq[ix(L.converter(ConverterSymbol::P, i))]) << ','
              << f17(eq.x_eq[ix(L.converter(ConverterSymbol::Q, i))]) << ',' << f17(w[ix(i)]) << ','
              << f17(pt.exo.P_star[ix(i)]) << ',' << f17(pt.exo.Q_star[ix(i)]) << ',' << f17(pt.exo.U_star[ix(i)])
              << ',' << f17(pt.exo.xi[ix(i)]) << ',' << f17(droop[ix(i)]) << '\n';
        m.output(out / "converters.csv");
    }
    const auto d = state_diagnostics(model, eq.x_eq);
    {
        auto f = open_out(out / "summary.csv");
        f << "quantity,value\n";
        f << "t_s," << f17(at) << '\n';
        f << "omega_sync," << f17(eq.omega_sync) << '\n';
        f << "omega_dev," << f17(eq.omega_dev) << '\n';
        f << "residual_norm," << f17(eq.residual_norm) << '\n';
        f << "iterations," << eq.iterations << '\n';
        f << "kcl_residual_max," << f17(std::max(d.kcl_residual_d, d.kcl_residual_q)) << '\n';
        f << "total_gen_p," << f17(d.total_gen_p) << '\n';
        f << "total_load_p," << f17(d.total_load_p) << '\n';
        f << "total_loss_p," << f17(d.total_loss_p) << '\n';
        f << "droop_spread_rel," << f17(relative_spread(droop)) << '\n';
        m.output(out / "summary.csv");
    }
    if (debug) {
        model.write_debug_csv(out);
        for (const char* f : {"M1.csv", "M2.csv", "K.csv"}) m.output(out / f);
    }
    m.results()["omega_sync"] = eq.omega_sync;
    m.results()["iterations"] = eq.iterations;
    m.write(out);
    std::cout << "equilibrium at t_s=" << at << ": omega_sync=" << f17(eq.omega_sync) << " rad/s, "
              << eq.iterations << " iterations, residual " << eq.residual_norm << '\n';
    return 0;
}

// --------------------------------------------------------------- transient

struct TransientOptions {
    double from = 0.0, step_to = 0.0, horizon = 1.0;
    std::string u_schedule;
    std::size_t samples = 1000;
    std::vector<int> plot_buses;
    bool debug = false;
};

int cmd_transient(const Globals& g, const TransientOptions& o) {
    Manifest m("transient");
    const auto in = read_inputs(g, &m);
    echo_config(m, g, in);
    const auto& topo = *in.topology;
    m.options()["from"] = o.from;
    m.options()["step_to"] = o.step_to;
    m.options()["horizon"] = o.horizon;
    m.options()["samples"] = o.samples;
    if (!o.u_schedule.empty()) {
        m.options()["u_schedule"] = o.u_schedule;
        m.input("u_schedule", o.u_schedule);
    }
    if (!(o.horizon >= 0.0)) throw InputError("--horizon must be non-negative");
    if (o.samples == 0) throw InputError("--samples must be positive");
    const auto out = prepare_out(g);

    const auto pb = point_at(in.series, topo, o.from, in.omega_ref);
    const auto pa = point_at(in.series, topo, o.step_to, in.omega_ref);
    print_warnings(pb);
    print_warnings(pa);
    const ReducedModel before(in.topology, pb.loads), after(in.topology, pa.loads);
    const auto nC = topo.n_converters();
    const auto u0 = ControlInput::zeros(nC);
    const auto sched = o.u_schedule.empty() ? ControlSchedule::constant(u0)
                                            : ControlSchedule::load_csv(o.u_schedule, topo);

    const auto eq = find_equilibrium(before, pb.exo, u0);
    IntegratorConfig cfg;
    cfg.rtol = g.rtol;
    cfg.atol = g.atol;
    cfg.horizon = o.horizon;
    cfg.dt_max = std::max(cfg.dt_initial, std::min(0.05, o.horizon));
    cfg.sample_times = o.horizon > 0.0 ? uniform_samples(o.horizon, o.samples) : std::vector<double>{0.0};
    cfg.record_algebraics = true;
    cfg.frame_omega = eq.omega_dev;
    m.config()["frame_omega"] = eq.omega_dev;
    const auto traj = integrate(after, eq.x_eq, pa.exo, sched, cfg);

    write_trajectory_csv(out / "trajectory.csv", traj, after);
    m.output(out / "trajectory.csv");
    const auto diag = trajectory_diagnostics(traj, after);
    write_diagnostics_csv(out / "diagnostics.csv", diag);
    m.output(out / "diagnostics.csv");

    // channels.csv feeds the plots
    const auto& L = after.layout();
    std::vector<int> buses = o.plot_buses;
    if (buses.empty()) {
        buses.push_back(topo.bus_ids.front());
        buses.push_back(topo.bus_ids[topo.n_bus() / 2]);
        buses.push_back(topo.bus_ids.back());
    }
    for (int b : buses) (void)topo.bus_index(b);
    {
        auto f = open_out(out / "channels.csv");
        f << 't';
        for (const auto& c : topo.converters) f << ",omega_" << c.id;
        for (const auto& c : topo.converters) f << ",P_" << c.id;
        for (const auto& c : topo.converters) f << ",Q_" << c.id;
        for (int b : buses) f << ",vmag_" << b;
        f << '\n';
        for (std::size_t k = 0; k < traj.times.size(); ++k) {
            const auto& x = traj.states[k];
            f << f17(traj.times[k]);
            for (std::size_t i = 0; i < nC; ++i) f << ',' << f17(traj.algebraics[k][i].omega);
            for (std::size_t i = 0; i < nC; ++i) f << ',' << f17(x[ix(L.converter(ConverterSymbol::P, i))]);
            for (std::size_t i = 0; i < nC; ++i) f << ',' << f17(x[ix(L.converter(ConverterSymbol::Q, i))]);
            for (int b : buses) {
                const Idx j = ix(topo.bus_index(b));
                f << ',' << f17(std::hypot(traj.bus_voltages[k].v_Bd[j], traj.bus_voltages[k].v_Bq[j]));
            }
            f << '\n';
        }
        m.output(out / "channels.csv");
    }
    {
        const auto ch = csv::read(out / "channels.csv");
        const auto t = column(ch, "t");
        auto group = [&](const std::string& prefix, const std::vector<std::string>& names, double s) {
            std::vector<svg::Series> v;
            for (const auto& n : names) v.push_back({n, t, scaled(column(ch, prefix + n), s)});
            return v;
        };
        std::vector<std::string> ids, bus_names;
        for (const auto& c : topo.converters) ids.push_back(c.id);
        for (int b : buses) bus_names.push_back(std::to_string(b));
        svg::plot(out / "frequency.svg", "Converter frequency", "t (s)", "omega (rad/s)", group("omega_", ids, 1.0));
        svg::plot(out / "power_p.svg", "Active power", "t (s)", "P (kW)", group("P_", ids, 1e-3));
        svg::plot(out / "power_q.svg", "Reactive power", "t (s)", "Q (kvar)", group("Q_", ids, 1e-3));
        svg::plot(out / "voltage.svg", "Bus voltage magnitude", "t (s)", "|v| (kV)", group("vmag_", bus_names, 1e-3));
        for (const char* f : {"frequency.svg", "power_p.svg", "power_q.svg", "voltage.svg"}) m.output(out / f);
    }

    // droop sharing at the end of the horizon and at the settled point
    const Vector& xe = traj.states.back();
    const Vector end_terms = droop_terms(topo, L, xe, pa.exo);
    double kcl_max = 0.0;
    for (const auto& d : diag) kcl_max = std::max({kcl_max, d.kcl_residual_d, d.kcl_residual_q});
    for (double k : traj.step_kcl_max) kcl_max = std::max(kcl_max, k);
    auto f = open_out(out / "summary.csv");
    f << "quantity,value\n";
    f << "omega_sync_before," << f17(eq.omega_sync) << '\n';
    f << "accepted_steps," << traj.accepted_steps << '\n';
    f << "rejected_steps," << traj.rejected_steps << '\n';
    f << "kcl_residual_max," << f17(kcl_max) << '\n';
    f << "droop_spread_rel_end," << f17(relative_spread(end_terms)) << '\n';
    m.results()["droop_spread_rel_end"] = relative_spread(end_terms);
    std::cout << "transient: " << traj.times.size() << " samples, " << traj.accepted_steps << " steps; droop spread at t="
              << o.horizon << ": " << relative_spread(end_terms);
    if (&sched.at(o.horizon) == &sched.at(0.0)) {
        try {
            const auto settled = find_equilibrium(after, pa.exo, sched.at(o.horizon), xe);
            const Vector st = droop_terms(topo, L, settled.x_eq, pa.exo);
            f << "omega_sync_after," << f17(settled.omega_sync) << '\n';
            f << "droop_spread_rel_settled," << f17(relative_spread(st)) << '\n';
            m.results()["omega_sync_after"] = settled.omega_sync;
            m.results()["droop_spread_rel_settled"] = relative_spread(st);
            std::cout << ", settled: " << relative_spread(st) << " (omega_sync " << f17(settled.omega_sync) << ")";
        } catch (const NumericalError& e) {
            f << "droop_spread_rel_settled,nan\n";
            std::cout << ", settled point not found: " << e.what();
        }
    }
    std::cout << '\n';
    m.output(out / "summary.csv");
    if (o.debug) {
        after.write_debug_csv(out);
        for (const char* n : {"M1.csv", "M2.csv", "K.csv"}) m.output(out / n);
    }
    m.write(out);
    return 0;
}

// ------------------------------------------------------------------- sweep

struct SweepRow {
    long long t = 0;
    bool ok = false;
    int iterations = 0;
    double omega_sync = NAN, omega_dev = NAN, residual = NAN, abscissa = NAN, zero_mode = NAN;
    std::size_t warnings = 0;
    std::string message;
};

unsigned thread_count(std::size_t work) {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("MGSIM_THREADS")) {
        try {
            const long long v = csv::parse_int(env, "MGSIM_THREADS");
            if (v < 1) throw InputError("MGSIM_THREADS must be >= 1");
            n = static_cast<unsigned>(v);
        } catch (const ParseError&) {
            throw InputError(std::string("MGSIM_THREADS must be a positive integer, got '") + env + "'");
        }
    }
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(work, 1)));
}

int cmd_sweep(const Globals& g, double from, double to) {
    Manifest m("sweep");
    const auto in = read_inputs(g, &m);
    echo_config(m, g, in);
    m.options()["from"] = from;
    m.options()["to"] = to;
    const auto out = prepare_out(g);
    const auto& topo = *in.topology;

    std::vector<long long> ts;
    for (long long t : in.series.timestamps)
        if (static_cast<double>(t) >= from && static_cast<double>(t) <= to) ts.push_back(t);

    // Fixed one-day chunks, each warm-started in sequence: output does not
    // depend on the thread count.
    constexpr std::size_t kChunk = 96;
    const std::size_t n_chunks = (ts.size() + kChunk - 1) / kChunk;
    const unsigned threads = thread_count(n_chunks);
    m.config()["threads"] = threads;
    m.config()["chunk"] = kChunk;
    std::vector<SweepRow> rows(ts.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        const auto u = ControlInput::zeros(topo.n_converters());
        for (std::size_t c = next++; c < n_chunks; c = next++) {
            std::optional<Vector> guess;
            for (std::size_t k = c * kChunk; k < std::min(ts.size(), (c + 1) * kChunk); ++k) {
                SweepRow& r = rows[k];
                r.t = ts[k];
                try {
                    const auto pt = point_at(in.series, topo, static_cast<double>(ts[k]), in.omega_ref);
                    r.warnings = pt.warnings.size();
                    const ReducedModel model(in.topology, pt.loads);
                    const auto eq = find_equilibrium(model, pt.exo, u, guess);
                    r.iterations = eq.iterations;
                    r.omega_sync = eq.omega_sync;
                    r.omega_dev = eq.omega_dev;
                    r.residual = eq.residual_norm;
                    guess = eq.x_eq;
                    const auto ss = linearize(model, eq.x_eq, pt.exo, u, eq.omega_dev);
                    r.abscissa = ss.spectral_abscissa_excl;
                    r.zero_mode = std::abs(ss.eigenvalues[ss.zero_mode_index]);
                    r.ok = true;
                } catch (const std::exception& e) {
                    r.message = sanitize(e.what());
                    guess.reset();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::size_t ok = 0;
    {
        auto f = open_out(out / "sweep.csv");
        f << "t_s,status,iterations,omega_sync,omega_dev,residual_norm,spectral_abscissa,zero_mode_abs,warnings,message\n";
        for (const auto& r : rows) {
            ok += r.ok;
            f << r.t << ',' << (r.ok ? "ok" : "failed") << ',' << r.iterations << ',' << f17(r.omega_sync) << ','
              << f17(r.omega_dev) << ',' << f17(r.residual) << ',' << f17(r.abscissa) << ',' << f17(r.zero_mode)
              << ',' << r.warnings << ',' << r.message << '\n';
        }
        m.output(out / "sweep.csv");
    }
    {
        const auto tab = csv::read(out / "sweep.csv");
        const auto t = scaled(column(tab, "t_s"), 1.0 / 3600.0);
        svg::plot(out / "sweep_omega.svg", "Synchronous frequency", "t (h)", "omega_sync (rad/s)",
                  {{"omega_sync", t, column(tab, "omega_sync")}});
        svg::plot(out / "sweep_abscissa.svg", "Spectral abscissa (zero mode excluded)", "t (h)", "max Re (1/s)",
                  {{"abscissa", t, column(tab, "spectral_abscissa")}});
        m.output(out / "sweep_omega.svg");
        m.output(out / "sweep_abscissa.svg");
    }
    const double rate = ts.empty() ? 1.0 : static_cast<double>(ok) / static_cast<double>(ts.size());
    m.results()["points"] = ts.size();
    m.results()["succeeded"] = ok;
    m.write(out);
    std::cout << "sweep: " << ok << "/" << ts.size() << " points succeeded\n";
    return rate >= 0.99 ? 0 : 2;
}

// --------------------------------------------------------------------- eig

int cmd_eig(const Globals& g, double at, bool debug) {
    Manifest m("eig");
    const auto in = read_inputs(g, &m);
    echo_config(m, g, in);
    m.options()["at"] = at;
    const auto out = prepare_out(g);
    const auto pt = point_at(in.series, *in.topology, at, in.omega_ref);
    print_warnings(pt);
    const ReducedModel model(in.topology, pt.loads);
    const auto u = ControlInput::zeros(in.topology->n_converters());
    const auto eq = find_equilibrium(model, pt.exo, u);
    const auto ss = linearize(model, eq.x_eq, pt.exo, u, eq.omega_dev);

    write_eigen_csv(out / "eig.csv", ss);
    m.output(out / "eig.csv");
    {
        auto f = open_out(out / "eig_summary.csv");
        f << "quantity,value\n";
        f << "n," << ss.eigenvalues.size() << '\n';
        f << "n_dynamic," << ss.n_dynamic << '\n';
        f << "zero_mode_index," << ss.zero_mode_index << '\n';
        f << "zero_mode_re," << f17(ss.eigenvalues[ss.zero_mode_index].real()) << '\n';
        f << "zero_mode_im," << f17(ss.eigenvalues[ss.zero_mode_index].imag()) << '\n';
        f << "zero_threshold," << f17(ss.zero_threshold) << '\n';
        f << "spectral_radius," << f17(ss.spectral_radius) << '\n';
        f << "spectral_abscissa_excl," << f17(ss.spectral_abscissa_excl) << '\n';
        f << "zero_mode_angle," << f17(ss.zero_mode_angle) << '\n';
        f << "omega_dev," << f17(ss.omega_dev) << '\n';
        m.output(out / "eig_summary.csv");
    }
    {
        const auto tab = csv::read(out / "eig.csv");
        const auto re = column(tab, "re"), im = column(tab, "im");
        const auto kc = tab.column("kind");
        std::vector<svg::Series> s{{"dynamic", {}, {}}, {"zero_mode", {}, {}}};
        for (std::size_t k = 0; k < tab.rows.size(); ++k) {
            const auto& kind = tab.rows[k][kc];
            if (kind == "kcl_invariant") continue;
            auto& dst = kind == "zero_mode" ? s[1] : s[0];
            dst.x.push_back(re[k]);
            dst.y.push_back(im[k]);
        }
        svg::plot(out / "spectrum.svg", "Eigenvalues", "Re (1/s)", "Im (rad/s)", s, svg::Style::markers);
        m.output(out / "spectrum.svg");
    }
    if (debug) {
        model.write_debug_csv(out);
        for (const char* n : {"M1.csv", "M2.csv", "K.csv"}) m.output(out / n);
    }
    m.results()["spectral_abscissa_excl"] = ss.spectral_abscissa_excl;
    m.write(out);
    std::cout << "eig at t_s=" << at << ": " << ss.n_dynamic << " dynamic modes, zero mode |lambda| = "
              << std::abs(ss.eigenvalues[ss.zero_mode_index]) << ", spectral abscissa (excl. zero) "
              << ss.spectral_abscissa_excl << '\n';
    return 0;
}

// -------------------------------------------------------- scenario-convert

int cmd_convert(const Globals& g, const std::string& raw_dir, const std::string& xi_sign) {
    if (!g.v_nominal) throw InputError("scenario-convert requires --v-nominal (V)");
    Manifest m("scenario-convert");
    const auto topo = read_topology(g, &m);
    ConvertOptions opt;
    opt.v_nominal = *g.v_nominal;
    if (xi_sign == "actual-minus-forecast") opt.xi_sign = XiSign::actual_minus_forecast;
    else if (xi_sign == "forecast-minus-actual") opt.xi_sign = XiSign::forecast_minus_actual;
    else throw InputError("--xi-sign must be actual-minus-forecast or forecast-minus-actual");
    for (const char* f : {"load_power.csv", "renewables.csv", "volt_var.csv"}) m.input("raw", fs::path(raw_dir) / f);
    m.options()["raw_dir"] = raw_dir;
    m.options()["xi_sign"] = xi_sign;
    m.config()["v_nominal"] = *g.v_nominal;
    const auto series = convert_from_power(raw_dir, *topo, opt);
    const auto out = prepare_out(g);
    write_scenario(out, series);
    for (const char* f : {"loads.csv", "setpoints_p.csv", "setpoints_qu.csv", "xi.csv"}) m.output(out / f);
    m.results()["points"] = series.size();
    m.write(out);
    std::cout << "scenario-convert: wrote " << series.size() << " points to " << out.string() << '\n';
    return 0;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"mgsim: islanded microgrid simulation engine"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--topology", g.topology, "topology JSON (default: built-in 32-bus grid)");
    app.add_option("--scenario", g.scenario, "scenario directory (default: bundled one-week sample)");
    app.add_option("--out-dir", g.out_dir, "output directory");
    app.add_option("--omega-ref", g.omega_ref, "reference frequency in rad/s (default: omega_n)");
    app.add_option("--v-nominal", g.v_nominal, "nominal voltage magnitude in V, used by scenario-convert");
    app.add_option("--rtol", g.rtol, "integrator relative tolerance");
    app.add_option("--atol", g.atol, "integrator absolute tolerance");
    app.add_option("--seed", g.seed, "seed for randomized harnesses");

    auto* validate = app.add_subcommand("validate", "check topology and scenario files");

    double at = 0.0;
    bool debug = false;
    auto* equilibrium = app.add_subcommand("equilibrium", "steady state at one scenario point");
    equilibrium->add_option("--at", at, "scenario time in s")->required();
    equilibrium->add_flag("--debug-matrices", debug, "also write M1.csv, M2.csv, K.csv");

    TransientOptions topt;
    std::string plot_buses;
    auto* transient = app.add_subcommand("transient", "step response between two scenario points");
    transient->add_option("--from", topt.from, "scenario time of the initial equilibrium")->required();
    transient->add_option("--step-to", topt.step_to, "scenario time applied from t = 0")->required();
    transient->add_option("--horizon", topt.horizon, "simulated time in s")->required();
    transient->add_option("--u-schedule", topt.u_schedule, "piecewise-constant control CSV (t_s,up_<id>,uq_<id>)");
    transient->add_option("--samples", topt.samples, "output intervals over the horizon");
    transient->add_option("--plot-buses", plot_buses, "comma-separated bus ids for the voltage plot");
    transient->add_flag("--debug-matrices", topt.debug, "also write M1.csv, M2.csv, K.csv");

    double from = 0.0, to = 0.0;
    auto* sweep = app.add_subcommand("sweep", "equilibrium and spectrum at every point in a range");
    sweep->add_option("--from", from, "first scenario time (s)")->required();
    sweep->add_option("--to", to, "last scenario time (s), inclusive")->required();

    auto* eig = app.add_subcommand("eig", "eigenvalues at one scenario point");
    eig->add_option("--at", at, "scenario time in s")->required();
    eig->add_flag("--debug-matrices", debug, "also write M1.csv, M2.csv, K.csv");

    std::string raw_dir, xi_sign = "actual-minus-forecast";
    auto* convert = app.add_subcommand("scenario-convert", "write the scenario schema from per-element power data");
    convert->add_option("--raw-dir", raw_dir, "directory with load_power.csv, renewables.csv, volt_var.csv")->required();
    convert->add_option("--xi-sign", xi_sign, "actual-minus-forecast (default) or forecast-minus-actual");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (!plot_buses.empty()) {
            std::stringstream ss(plot_buses);
            std::string item;
            while (std::getline(ss, item, ','))
                topt.plot_buses.push_back(static_cast<int>(csv::parse_int(item, "--plot-buses")));
        }
        if (*validate) return cmd_validate(g);
        if (*equilibrium) return cmd_equilibrium(g, at, debug);
        if (*transient) return cmd_transient(g, topt);
        if (*sweep) return cmd_sweep(g, from, to);
        if (*eig) return cmd_eig(g, at, debug);
        if (*convert) return cmd_convert(g, raw_dir, xi_sign);
    } catch (const StepSizeError& e) {
        std::cerr << "numerical error at t = " << e.time() << " s: " << e.what() << '\n';
        return 2;
    } catch (const ConvergenceError& e) {
        std::cerr << "numerical error (last residual " << e.last_residual() << "): " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 2;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace mgsim::cli
