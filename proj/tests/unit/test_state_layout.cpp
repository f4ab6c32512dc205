#include <gtest/gtest.h>

#include <set>

#include <random>

#include "mgsim/state_layout.hpp"
#include "support.hpp"

using namespace mgsim;

TEST(StateLayout, BlockOrder) {
    const StateLayout L(9, 23, 31);
    EXPECT_EQ(L.size(), 225u);
    EXPECT_EQ(L.x1_size(), 81u);
    EXPECT_EQ(L.x2_size(), 144u);
    EXPECT_EQ(L.converter(ConverterSymbol::delta, 0), 0u);
    EXPECT_EQ(L.converter(ConverterSymbol::P, 2), 11u);
    EXPECT_EQ(L.converter(ConverterSymbol::i_oq, 8), 116u);
    EXPECT_EQ(L.load_d(0), 117u);
    EXPECT_EQ(L.load_q(0), 140u);
    EXPECT_EQ(L.branch_d(0), 163u);
    EXPECT_EQ(L.branch_q(30), 224u);
    EXPECT_EQ(L.dq_pairs().size(), 5u * 9 + 23 + 31);
}

TEST(StateLayout, Labels) {
    const auto t = default_topology();
    const auto labels = StateLayout(t).labels(t);
    ASSERT_EQ(labels.size(), 225u);
    EXPECT_EQ(labels[0], "G1.delta");
    EXPECT_EQ(labels[StateLayout(t).converter(ConverterSymbol::v_od, 2)], "G3.v_od");
    EXPECT_EQ(labels.back(), "B32-33.i_Bq");
    std::set<std::string> unique(labels.begin(), labels.end());
    EXPECT_EQ(unique.size(), labels.size());
}

TEST(StateLayout, RotationComposes) {
    const StateLayout L(9, 23, 31);
    std::mt19937_64 rng(3);
    const Vector x = test::random_state(L, rng);
    const Vector a = rotate_state(L, rotate_state(L, x, 0.3), 0.4);
    const Vector b = rotate_state(L, x, 0.7);
    EXPECT_LT(test::block_rel_diff(L, a, b), 1e-14);
    EXPECT_LT(test::block_rel_diff(L, rotate_state(L, x, 0.0), x), 1e-300 + 1e-16);
}

TEST(StateLayout, GeneratorIsDerivativeOfRotation) {
    const StateLayout L(9, 23, 31);
    std::mt19937_64 rng(4);
    const Vector x = test::random_state(L, rng);
    const double h = 1e-6;
    const Vector fd = (rotate_state(L, x, h) - rotate_state(L, x, -h)) / (2 * h);
    EXPECT_LT(test::block_rel_diff(L, fd, rotation_generator(L, x)), 1e-8);
}

TEST(StateLayout, DerivativeRotationLeavesScalars) {
    const StateLayout L(9, 23, 31);
    std::mt19937_64 rng(5);
    const Vector dx = test::random_state(L, rng);
    const Vector r = rotate_derivative(L, dx, 1.1);
    for (std::size_t i = 0; i < 9; ++i) {
        for (auto s : {ConverterSymbol::delta, ConverterSymbol::P, ConverterSymbol::Q})
            EXPECT_EQ(r[static_cast<Eigen::Index>(L.converter(s, i))], dx[static_cast<Eigen::Index>(L.converter(s, i))]);
    }
}

TEST(StateLayout, BlockScale) {
    const StateLayout L(2, 1, 1);
    Vector x = Vector::Zero(static_cast<Eigen::Index>(L.size()));
    x[static_cast<Eigen::Index>(L.converter(ConverterSymbol::v_od, 1))] = -7.0;
    const Vector s = block_scale(L, x, 0.5);
    EXPECT_EQ(s[static_cast<Eigen::Index>(L.converter(ConverterSymbol::v_od, 0))], 7.0);
    EXPECT_EQ(s[static_cast<Eigen::Index>(L.converter(ConverterSymbol::P, 0))], 0.5);
}
