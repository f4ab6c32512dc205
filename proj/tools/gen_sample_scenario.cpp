// Writes the bundled one-week sample: raw per-element power data plus the
// converted scenario schema. Loads follow the IEEE 33-bus nominal values with
// a daily shape; wind and solar are synthetic. Volt/VAR setpoints are made
// self-consistent by one equilibrium solve per point (Q* = Q_eq,
// U* = v_nom - K_q Q_eq), which leaves each equilibrium unchanged.
//
// usage: gen_sample_scenario <out_dir> [days=7] [seed=20240101]

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <string>

#include "mgsim/csv.hpp"
#include "mgsim/equilibrium.hpp"
#include "mgsim/scenario.hpp"

using namespace mgsim;
namespace fs = std::filesystem;

namespace {

constexpr double kVNominal = 12.66e3;

double round_to(double v, double q) { return std::round(v / q) * q; }

double load_shape(double hour, int day) {
    const double morning = 0.25 * std::exp(-std::pow((hour - 8.5) / 2.5, 2));
    const double evening = 0.40 * std::exp(-std::pow((hour - 19.0) / 3.0, 2));
    const double weekend = (day % 7 >= 5) ? 0.9 : 1.0;
    return weekend * (0.55 + morning + evening);
}

void write_volt_var(const fs::path& path, const ScenarioSeries& s, const Matrix& q, const Matrix& u) {
    std::ofstream out(path, std::ios::binary);
    out << "t_s";
    for (const auto& id : s.converter_ids) out << ",Qstar_" << id;
    for (const auto& id : s.converter_ids) out << ",Ustar_" << id;
    out << '\n';
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
        out << s.timestamps[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < q.cols(); ++c) out << ',' << csv::format_shortest(q(r, c));
        for (Eigen::Index c = 0; c < u.cols(); ++c) out << ',' << csv::format_shortest(u(r, c));
        out << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: gen_sample_scenario <out_dir> [days] [seed]\n";
        return 1;
    }
    const fs::path out = argv[1];
    const int days = argc > 2 ? std::stoi(argv[2]) : 7;
    const unsigned seed = argc > 3 ? static_cast<unsigned>(std::stoul(argv[3])) : 20240101u;
    const fs::path raw = out / "raw";
    fs::create_directories(raw);

    const auto topo = default_topology();
    const std::size_t T = static_cast<std::size_t>(days) * 96;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    std::uniform_real_distribution<double> U(0.0, 1.0);

    // per-load phase jitter, per-unit wind phases, daily cloudiness
    std::vector<double> load_offset;
    for (std::size_t l = 0; l < topo.n_loads(); ++l) load_offset.push_back(0.1 * (U(rng) - 0.5));
    std::vector<double> phase;
    for (std::size_t c = 0; c < topo.n_converters(); ++c) phase.push_back(2 * std::numbers::pi * U(rng));
    std::vector<double> cloud;
    for (int d = 0; d < days; ++d) cloud.push_back(0.6 + 0.4 * U(rng));

    {
        std::ofstream lp(raw / "load_power.csv", std::ios::binary);
        lp << "t_s";
        for (const auto& l : topo.loads) lp << ",P_" << l.id;
        for (const auto& l : topo.loads) lp << ",Q_" << l.id;
        lp << '\n';
        std::ofstream rn(raw / "renewables.csv", std::ios::binary);
        rn << "t_s";
        for (const auto& c : topo.converters)
            if (c.params.kind != ConverterKind::storage) rn << ",forecast_" << c.id;
        for (const auto& c : topo.converters)
            if (c.params.kind != ConverterKind::storage) rn << ",actual_" << c.id;
        rn << '\n';

        for (std::size_t k = 0; k < T; ++k) {
            const long long t = static_cast<long long>(k) * kScenarioSpacing;
            const double hour = std::fmod(static_cast<double>(t) / 3600.0, 24.0);
            const int day = static_cast<int>(t / 86400);
            std::vector<double> P, Q;
            for (std::size_t l = 0; l < topo.n_loads(); ++l) {
                const auto [p0, q0] = ieee33_nominal_load(topo.loads[l].bus);
                const double s = load_shape(hour, day) + load_offset[l];
                P.push_back(round_to(p0 * s * (1.0 + 0.02 * N(rng)), 0.1));
                Q.push_back(round_to(q0 * s * (1.0 + 0.02 * N(rng)), 0.1));
            }
            lp << t;
            for (double v : P) lp << ',' << csv::format_shortest(v);
            for (double v : Q) lp << ',' << csv::format_shortest(v);
            lp << '\n';

            std::vector<double> fc, ac;
            for (std::size_t c = 0; c < topo.n_converters(); ++c) {
                const auto& p = topo.converters[c].params;
                const double ts = static_cast<double>(t);
                double f = 0.0;
                if (p.kind == ConverterKind::wind) {
                    const double w = 0.35 + 0.2 * std::sin(2 * std::numbers::pi * ts / (3.1 * 86400) + phase[c]) +
                                     0.1 * std::sin(2 * std::numbers::pi * ts / (0.7 * 86400) + 2 * phase[c]);
                    f = p.P_max * std::clamp(w, 0.02, 0.9);
                } else if (p.kind == ConverterKind::solar) {
                    f = p.P_max * 0.85 * cloud[static_cast<std::size_t>(day)] *
                        std::max(0.0, std::sin(std::numbers::pi * (hour - 6.0) / 12.0));
                } else {
                    continue;
                }
                f = round_to(f, 0.1);
                const double noise = p.kind == ConverterKind::wind ? 0.08 : 0.1;
                const double a = f > 0.0 ? round_to(std::clamp(f * (1.0 + noise * N(rng)), 0.0, p.P_max), 0.1) : 0.0;
                fc.push_back(f);
                ac.push_back(a);
            }
            rn << t;
            for (double v : fc) rn << ',' << csv::format_shortest(v);
            for (double v : ac) rn << ',' << csv::format_shortest(v);
            rn << '\n';
        }
    }

    // pass 1: flat Volt/VAR data, then equilibria fix Q*, U*
    ScenarioSeries s;
    s.converter_ids.clear();
    for (const auto& c : topo.converters) s.converter_ids.push_back(c.id);
    for (std::size_t k = 0; k < T; ++k) s.timestamps.push_back(static_cast<long long>(k) * kScenarioSpacing);
    const auto nC = static_cast<Eigen::Index>(topo.n_converters());
    Matrix q = Matrix::Zero(static_cast<Eigen::Index>(T), nC);
    Matrix u = Matrix::Constant(static_cast<Eigen::Index>(T), nC, kVNominal);
    write_volt_var(raw / "volt_var.csv", s, q, u);

    ConvertOptions opt;
    opt.v_nominal = kVNominal;
    const auto flat = convert_from_power(raw, topo, opt);
    const auto shared = std::make_shared<const GridTopology>(topo);
    const double wn = network_omega(topo);
    std::optional<Vector> guess;
    for (std::size_t k = 0; k < T; ++k) {
        const auto pt = point_at(flat, topo, static_cast<double>(flat.timestamps[k]), wn);
        const ReducedModel model(shared, pt.loads);
        const auto eq = find_equilibrium(model, pt.exo, ControlInput::zeros(topo.n_converters()), guess);
        guess = eq.x_eq;
        for (Eigen::Index c = 0; c < nC; ++c) {
            const double qeq = round_to(eq.x_eq[static_cast<Eigen::Index>(
                                            model.layout().converter(ConverterSymbol::Q, static_cast<std::size_t>(c)))],
                                        0.1);
            q(static_cast<Eigen::Index>(k), c) = qeq;
            u(static_cast<Eigen::Index>(k), c) =
                round_to(kVNominal - topo.converters[static_cast<std::size_t>(c)].params.K_q * qeq, 1e-6);
        }
    }
    write_volt_var(raw / "volt_var.csv", s, q, u);

    const auto series = convert_from_power(raw, topo, opt);
    write_scenario(out, series);
    std::cout << "wrote " << series.size() << " points to " << out.string() << '\n';
    return 0;
}
