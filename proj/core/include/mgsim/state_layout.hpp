#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mgsim/grid_model.hpp"
#include "mgsim/types.hpp"

namespace mgsim {

/// Per-converter state symbols in block order.
enum class ConverterSymbol : int {
    delta = 0, P, Q, phi_d, phi_q, gamma_d, gamma_q, i_ld, i_lq, v_od, v_oq, i_od, i_oq
};
inline constexpr int kConverterStates = 13;
inline constexpr int kConverterX1States = 9;  // delta .. i_lq

std::string_view symbol_name(ConverterSymbol s);

/// Layout of the stacked state vector: all deltas, then all P, ..., all i_oq,
/// then load currents (d block, q block), then branch currents (d, q).
/// x1 = first 9 converter blocks; x2 = the rest.
class StateLayout {
public:
    StateLayout() = default;
    StateLayout(std::size_t n_converters, std::size_t n_loads, std::size_t n_branches);
    explicit StateLayout(const GridTopology& topology);

    std::size_t n_converters() const { return nC_; }
    std::size_t n_loads() const { return nL_; }
    std::size_t n_branches() const { return nB_; }
    std::size_t size() const { return kConverterStates * nC_ + 2 * nL_ + 2 * nB_; }
    std::size_t x1_size() const { return kConverterX1States * nC_; }
    std::size_t x2_size() const { return size() - x1_size(); }

    std::size_t converter(ConverterSymbol s, std::size_t i) const {
        return static_cast<std::size_t>(s) * nC_ + i;
    }
    std::size_t block(ConverterSymbol s) const { return static_cast<std::size_t>(s) * nC_; }
    std::size_t load_d(std::size_t l) const { return kConverterStates * nC_ + l; }
    std::size_t load_q(std::size_t l) const { return kConverterStates * nC_ + nL_ + l; }
    std::size_t branch_d(std::size_t b) const { return kConverterStates * nC_ + 2 * nL_ + b; }
    std::size_t branch_q(std::size_t b) const { return kConverterStates * nC_ + 2 * nL_ + nB_ + b; }

    /// (d, q) index pairs of every rotating quantity.
    const std::vector<std::array<std::size_t, 2>>& dq_pairs() const { return pairs_; }

    /// Block id of each state index (0..12 converter symbols, 13/14 load/branch currents);
    /// used for block-wise scaling and norms.
    int block_id(std::size_t index) const;
    static constexpr int kBlockCount = 15;

    /// Labels such as "G3.v_od", "L7.i_Lq", "B2-3.i_Bd".
    std::vector<std::string> labels(const GridTopology& topology) const;

private:
    std::size_t nC_ = 0, nL_ = 0, nB_ = 0;
    std::vector<std::array<std::size_t, 2>> pairs_;
};

/// Rotate every dq pair by alpha and add alpha to every delta.
Vector rotate_state(const StateLayout& layout, const Vector& x, double alpha);

/// Rotate every dq pair by alpha; delta, P and Q untouched (derivative transform).
Vector rotate_derivative(const StateLayout& layout, const Vector& dx, double alpha);

/// d/dalpha rotate_state(x, alpha) at alpha = 0.
Vector rotation_generator(const StateLayout& layout, const Vector& x);

/// Per-index magnitude: max |x_j| over the block containing j, floored at `floor`.
Vector block_scale(const StateLayout& layout, const Vector& x, double floor);

}  // namespace mgsim
