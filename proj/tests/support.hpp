#pragma once

#include <cmath>
#include <fstream>
#include <iterator>
#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "mgsim/dynamics.hpp"
#include "mgsim/grid_model.hpp"
#include "mgsim/reduction.hpp"
#include "mgsim/scenario.hpp"

namespace mgsim::test {

inline constexpr double kVNominal = 12.66e3;

inline std::filesystem::path data_dir() { return MGSIM_DATA_DIR; }
inline std::filesystem::path sample_dir() { return data_dir() / "sample_week"; }
inline std::filesystem::path test_data() { return MGSIM_TEST_DATA; }

struct Nominal {
    std::shared_ptr<const GridTopology> topology;
    ScenarioPoint point;
    std::unique_ptr<ReducedModel> model;
    ControlInput u;
};

inline Nominal nominal() {
    Nominal n;
    n.topology = std::make_shared<const GridTopology>(default_topology());
    n.point = nominal_point(*n.topology, kVNominal, network_omega(*n.topology));
    n.model = std::make_unique<ReducedModel>(n.topology, n.point.loads);
    n.u = ControlInput::zeros(n.topology->n_converters());
    return n;
}

/// Every load scaled to draw `factor` times its power at the same voltage.
inline std::vector<LoadParams> scaled_loads(const std::vector<LoadParams>& loads, double factor) {
    auto out = loads;
    for (auto& l : out) {
        l.r_L /= factor;
        l.L_L /= factor;
    }
    return out;
}

/// Physically sized random state: voltages ~ kV, currents ~ 100 A, powers ~ MW.
inline Vector random_state(const StateLayout& L, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Vector x(static_cast<Eigen::Index>(L.size()));
    for (std::size_t i = 0; i < L.size(); ++i) {
        static const double scale[StateLayout::kBlockCount] = {0.5, 1e6, 1e6, 10, 10, 1, 1, 200, 200,
                                                               1.3e4, 1.3e4, 200, 200, 50, 50};
        x[static_cast<Eigen::Index>(i)] = scale[L.block_id(i)] * U(rng);
    }
    return x;
}

inline Exogenous random_exo(std::size_t nC, double omega_ref, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Exogenous e = Exogenous::zeros(nC, omega_ref);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(nC); ++i) {
        e.P_star[i] = 1e6 * U(rng);
        e.Q_star[i] = 5e5 * U(rng);
        e.U_star[i] = kVNominal * (1.0 + 0.05 * U(rng));
        e.xi[i] = 1e5 * U(rng);
    }
    return e;
}

inline ControlInput random_u(std::size_t nC, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    ControlInput u = ControlInput::zeros(nC);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(nC); ++i) {
        u.u_p[i] = 0.5 * U(rng);
        u.u_q[i] = 100.0 * U(rng);
    }
    return u;
}

/// Max over entries of |a - b| / max(|b| block magnitude, floor).
inline double block_rel_diff(const StateLayout& L, const Vector& a, const Vector& b) {
    const Vector s = block_scale(L, b, 1e-300);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]) / s[i]);
    return worst;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("mgsim_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace mgsim::test
