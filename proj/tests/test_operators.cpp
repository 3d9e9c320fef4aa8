#include <gtest/gtest.h>

#include <wgqed/operators.hpp>

#include "generators.hpp"
#include "oracles.hpp"

using namespace wgqed;
using wgqed::testing::Gen;
using wgqed::testing::max_abs;

TEST(Sigma, SingleAtomLowering) {
    Operator expected(2, 2);
    expected << 0, 0, 1, 0;
    EXPECT_EQ(sigma(1, SigmaKind::Minus, 1), expected);
}

TEST(Sigma, ExcitedSecondAtomHasPlusOneZ) {
    const DensityMatrix ge = product_state({false, true});
    const Eigen::Index k = static_cast<Eigen::Index>(basis_index({false, true}));
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(4);
    v(k) = 1;
    EXPECT_LT((sigma(2, SigmaKind::Z, 2) * v - v).norm(), 1e-15);
    EXPECT_NEAR(expectation(sigma(2, SigmaKind::Z, 2), ge), 1.0, 1e-15);
    EXPECT_NEAR(expectation(sigma(1, SigmaKind::Z, 2), ge), -1.0, 1e-15);
}

TEST(Sigma, BasisLayoutExcitedFirst) {
    EXPECT_EQ(basis_index({true, true}), 0u);
    EXPECT_EQ(basis_index({true, false}), 1u);
    EXPECT_EQ(basis_index({false, true}), 2u);
    EXPECT_EQ(basis_index({false, false}), 3u);
}

TEST(Sigma, PauliAlgebraThreeAtoms) {
    for (std::size_t j = 1; j <= 3; ++j) {
        const Operator p = sigma(j, SigmaKind::Plus, 3), m = sigma(j, SigmaKind::Minus, 3);
        EXPECT_LT(max_abs(commutator(p, m) - sigma(j, SigmaKind::Z, 3)), 1e-15);
        EXPECT_LT(max_abs(p * p), 1e-15);
        EXPECT_LT(max_abs(m * m), 1e-15);
        for (std::size_t l = 1; l <= 3; ++l) {
            if (l == j) continue;
            for (auto a : {SigmaKind::Minus, SigmaKind::Plus, SigmaKind::Z})
                for (auto b : {SigmaKind::Minus, SigmaKind::Plus, SigmaKind::Z})
                    EXPECT_LT(max_abs(commutator(sigma(j, a, 3), sigma(l, b, 3))), 1e-15);
        }
    }
}

TEST(Sigma, IndexOutOfRange) {
    EXPECT_THROW(sigma(0, SigmaKind::Z, 2), std::out_of_range);
    EXPECT_THROW(sigma(3, SigmaKind::Z, 2), std::out_of_range);
}

TEST(Kron, DimensionsAndMixedProduct) {
    Gen g(2);
    const Operator a = wgqed::testing::random_operator(g, 2), b = wgqed::testing::random_operator(g, 4);
    const Operator c = wgqed::testing::random_operator(g, 2), d = wgqed::testing::random_operator(g, 4);
    const Operator ab = kron(a, b);
    EXPECT_EQ(ab.rows(), 8);
    EXPECT_LT(max_abs(kron(a, b) * kron(c, d) - kron(a * c, b * d)), 1e-12);
}

TEST(Dissipator, ExcitedDecays) {
    const Operator m = sigma(1, SigmaKind::Minus, 1);
    const DensityMatrix e = product_state({true}), gnd = product_state({false});
    EXPECT_LT(max_abs(dissipator(m, e) - (gnd - e)), 1e-15);
    EXPECT_LT(max_abs(dissipator(m, gnd)), 1e-15);
}

TEST(Dissipator, TraceFreeAndHermitian) {
    Gen g(31);
    for (int i = 0; i < 100; ++i) {
        const Eigen::Index d = Eigen::Index{1} << g.integer(1, 3);
        const Operator o = wgqed::testing::random_operator(g, d);
        const Operator h = wgqed::testing::random_hermitian(g, d);
        const Operator out = dissipator(o, h);
        EXPECT_LT(std::abs(out.trace()), 1e-12);
        EXPECT_LT(hermiticity_residual(out), 1e-12);
    }
}

TEST(Dissipator, DimensionMismatchThrows) {
    EXPECT_THROW(dissipator(Operator::Identity(2, 2), DensityMatrix::Identity(4, 4)), std::invalid_argument);
}

TEST(Measurement, ZeroCollapseOperator) {
    Gen g(1);
    EXPECT_LT(max_abs(measurement_superop(Operator::Zero(4, 4), wgqed::testing::random_density(g, 4))), 1e-15);
}

TEST(Measurement, DarkGroundState) {
    EXPECT_LT(max_abs(measurement_superop(sigma(1, SigmaKind::Minus, 1), product_state({false}))), 1e-15);
}

TEST(Measurement, SuperpositionHandValue) {
    DensityMatrix plus(2, 2);
    plus << 0.5, 0.5, 0.5, 0.5;
    // L rho + rho L^dag - Tr[(L + L^dag) rho] rho with Tr[...] = 1.
    DensityMatrix expected(2, 2);
    expected << -0.5, 0, 0, 0.5;
    const Operator out = measurement_superop(sigma(1, SigmaKind::Minus, 1), plus);
    EXPECT_LT(max_abs(out - expected), 1e-15);
    EXPECT_LT(std::abs(out.trace()), 1e-15);
}

TEST(Measurement, TraceFreeForHermitianInput) {
    Gen g(41);
    for (int i = 0; i < 100; ++i) {
        const Eigen::Index d = Eigen::Index{1} << g.integer(1, 3);
        const Operator h = wgqed::testing::random_hermitian(g, d);
        EXPECT_LT(std::abs(measurement_superop(wgqed::testing::random_operator(g, d), h / h.trace()).trace()), 1e-10);
    }
}

TEST(StateQueries, PurityAndEigenvalues) {
    const DensityMatrix mixed = DensityMatrix::Identity(4, 4) / 4.0;
    EXPECT_NEAR(purity(mixed), 0.25, 1e-15);
    EXPECT_NEAR(min_eigenvalue(mixed), 0.25, 1e-15);
    EXPECT_NEAR(purity(product_state({true, false, true})), 1.0, 1e-15);
    EXPECT_EQ(hermiticity_residual(mixed), 0.0);
}

TEST(StateQueries, TraceProductMatchesTrace) {
    Gen g(6);
    for (int i = 0; i < 50; ++i) {
        const Operator a = wgqed::testing::random_operator(g, 8), b = wgqed::testing::random_operator(g, 8);
        EXPECT_LT(std::abs(trace_product(a, b) - (a * b).trace()), 1e-11);
    }
}
