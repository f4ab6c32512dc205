#include "mgsim/state_layout.hpp"

#include <cmath>

namespace mgsim {

std::string_view symbol_name(ConverterSymbol s) {
    static constexpr std::string_view names[kConverterStates] = {
        "delta", "P", "Q", "phi_d", "phi_q", "gamma_d", "gamma_q",
        "i_ld", "i_lq", "v_od", "v_oq", "i_od", "i_oq"};
    return names[static_cast<int>(s)];
}

StateLayout::StateLayout(std::size_t n_converters, std::size_t n_loads, std::size_t n_branches)
    : nC_(n_converters), nL_(n_loads), nB_(n_branches) {
    using S = ConverterSymbol;
    for (auto [d, q] : {std::pair{S::phi_d, S::phi_q}, std::pair{S::gamma_d, S::gamma_q},
                        std::pair{S::i_ld, S::i_lq}, std::pair{S::v_od, S::v_oq},
                        std::pair{S::i_od, S::i_oq}})
        for (std::size_t i = 0; i < nC_; ++i) pairs_.push_back({converter(d, i), converter(q, i)});
    for (std::size_t l = 0; l < nL_; ++l) pairs_.push_back({load_d(l), load_q(l)});
    for (std::size_t b = 0; b < nB_; ++b) pairs_.push_back({branch_d(b), branch_q(b)});
}

StateLayout::StateLayout(const GridTopology& topology)
    : StateLayout(topology.n_converters(), topology.n_loads(), topology.n_branches()) {}

int StateLayout::block_id(std::size_t index) const {
    const std::size_t conv_end = kConverterStates * nC_;
    if (index < conv_end) return static_cast<int>(index / nC_);
    if (index < conv_end + 2 * nL_) return kConverterStates;
    return kConverterStates + 1;
}

std::vector<std::string> StateLayout::labels(const GridTopology& topology) const {
    std::vector<std::string> out(size());
    for (int s = 0; s < kConverterStates; ++s)
        for (std::size_t i = 0; i < nC_; ++i)
            out[converter(static_cast<ConverterSymbol>(s), i)] =
                topology.converters[i].id + "." + std::string(symbol_name(static_cast<ConverterSymbol>(s)));
    for (std::size_t l = 0; l < nL_; ++l) {
        out[load_d(l)] = topology.loads[l].id + ".i_Ld";
        out[load_q(l)] = topology.loads[l].id + ".i_Lq";
    }
    for (std::size_t b = 0; b < nB_; ++b) {
        const auto& br = topology.branches[b];
        const std::string name = "B" + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
        out[branch_d(b)] = name + ".i_Bd";
        out[branch_q(b)] = name + ".i_Bq";
    }
    return out;
}

Vector rotate_state(const StateLayout& layout, const Vector& x, double alpha) {
    Vector y = rotate_derivative(layout, x, alpha);
    for (std::size_t i = 0; i < layout.n_converters(); ++i)
        y[static_cast<Eigen::Index>(layout.converter(ConverterSymbol::delta, i))] += alpha;
    return y;
}

Vector rotate_derivative(const StateLayout& layout, const Vector& dx, double alpha) {
    const double c = std::cos(alpha), s = std::sin(alpha);
    Vector y = dx;
    for (const auto& [d, q] : layout.dq_pairs()) {
        const auto id = static_cast<Eigen::Index>(d), iq = static_cast<Eigen::Index>(q);
        y[id] = c * dx[id] - s * dx[iq];
        y[iq] = s * dx[id] + c * dx[iq];
    }
    return y;
}

Vector rotation_generator(const StateLayout& layout, const Vector& x) {
    Vector g = Vector::Zero(x.size());
    for (std::size_t i = 0; i < layout.n_converters(); ++i)
        g[static_cast<Eigen::Index>(layout.converter(ConverterSymbol::delta, i))] = 1.0;
    for (const auto& [d, q] : layout.dq_pairs()) {
        const auto id = static_cast<Eigen::Index>(d), iq = static_cast<Eigen::Index>(q);
        g[id] = -x[iq];
        g[iq] = x[id];
    }
    return g;
}

Vector block_scale(const StateLayout& layout, const Vector& x, double floor) {
    std::array<double, StateLayout::kBlockCount> mags{};
    mags.fill(floor);
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        auto& m = mags[static_cast<std::size_t>(layout.block_id(static_cast<std::size_t>(j)))];
        m = std::max(m, std::abs(x[j]));
    }
    Vector s(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j)
        s[j] = mags[static_cast<std::size_t>(layout.block_id(static_cast<std::size_t>(j)))];
    return s;
}

}  // namespace mgsim
