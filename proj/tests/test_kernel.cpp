#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include <wgqed/config.hpp>
#include <wgqed/kernel.hpp>

#include "generators.hpp"
#include "oracles.hpp"

using namespace wgqed;
using wgqed::testing::Gen;
using wgqed::testing::max_abs;
using wgqed::testing::point_network;

namespace {

constexpr double pi = std::numbers::pi;

void expect_terms(const DelayKernel& k, const std::vector<std::pair<double, double>>& weight_delay) {
    ASSERT_EQ(k.size(), weight_delay.size());
    for (std::size_t i = 0; i < k.size(); ++i) {
        EXPECT_NEAR(std::abs(k.terms()[i].weight - cplx(weight_delay[i].first)), 0, 1e-14) << "term " << i;
        EXPECT_NEAR(k.terms()[i].delay, weight_delay[i].second, 1e-14) << "term " << i;
    }
}

Atom atom_with(std::vector<CouplingPoint> pts) {
    Atom a;
    a.points = std::move(pts);
    return a;
}

} // namespace

TEST(DelayKernel, MergesEqualDelaysAndPrunesZeros) {
    DelayKernel k({{1.0, 2.0, 0.0}, {0.5, -1.0, 0.0}, {-1.0, 2.0, 0.0}, {0.25, -1.0, 0.0}});
    expect_terms(k, {{0.75, -1.0}});
}

TEST(DelayKernel, KeepsDistinctPhasesAtOneDelay) {
    DelayKernel k({{1.0, 1.0, 0.0}, {1.0, 1.0, 0.5}, {1.0, 1.0, 2 * pi}});
    ASSERT_EQ(k.size(), 2u);
    EXPECT_NEAR(std::abs(k.weight_at(1.0) - cplx(3.0)), 0, 1e-15);
}

TEST(DelayKernel, SortedDistinctNonzero) {
    Gen g(3);
    for (int i = 0; i < 200; ++i) {
        std::vector<DeltaTerm> t;
        const int n = g.integer(0, 12);
        for (int m = 0; m < n; ++m) t.push_back({g.complex_normal() * (g.coin(0.2) ? 0.0 : 1.0), double(g.integer(-3, 3)), 0.0});
        DelayKernel k(t);
        for (std::size_t m = 0; m < k.size(); ++m) {
            EXPECT_GT(std::abs(k.terms()[m].weight), kWeightTol);
            if (m) EXPECT_LT(k.terms()[m - 1].delay, k.terms()[m].delay);
        }
    }
}

TEST(ChannelKernel, SemiTildeSinglePoint) {
    expect_terms(channel_kernel(atom_with({{1.0, 1.0, 0.2, 0.2}}), Channel::SemiTilde), {{-std::sqrt(0.2), -1.0}, {std::sqrt(0.2), 1.0}});
}

TEST(ChannelKernel, SemiOutputSigns) {
    expect_terms(channel_kernel(atom_with({{1.0, 1.0, 0.1, 0.3}}), Channel::SemiOutput), {{-std::sqrt(0.3), -1.0}, {std::sqrt(0.1), 1.0}});
}

TEST(ChannelKernel, UncoupledDirectionIsEmpty) {
    EXPECT_TRUE(channel_kernel(atom_with({{2.0, 2.0, 0.0, 0.4}}), Channel::InfLeft).empty());
}

TEST(ChannelKernel, TwoPointRightEmission) {
    const auto k = channel_kernel(atom_with({{1.0, 1.0, 0.0, 0.1}, {2.0, 2.0, 0.0, 0.3}}), Channel::InfRight);
    expect_terms(k, {{std::sqrt(0.3), -2.0}, {std::sqrt(0.1), -1.0}});
    EXPECT_EQ(k.mode(), FieldMode::RightMoving);
}

TEST(ChannelKernel, TopologyMismatchThrows) {
    const Network n = point_network(WaveguideKind::Infinite, {{1, 1, 0.1, 0.1}});
    EXPECT_THROW(channel_kernel(n, 0, Channel::SemiTilde), std::invalid_argument);
    EXPECT_THROW(channel_kernel(n, 3, Channel::InfLeft), std::out_of_range);
}

// Self-commutator of a mirror-reflected atom: one instantaneous and two echo terms.
TEST(CommutatorKernel, SingleAtomSemiInfinite) {
    const auto a = channel_kernel(atom_with({{1.5, 1.5, 0.2, 0.2}}), Channel::SemiTilde);
    expect_terms(commutator_kernel(a, a), {{-0.2, -3.0}, {0.4, 0.0}, {-0.2, 3.0}});
}

TEST(CommutatorKernel, TwoAtomsSemiInfinite) {
    const double g1L = 0.1, g1R = 0.2, g2L = 0.3, g2R = 0.4, t1 = 1.0, t2 = 2.5;
    const Network n = point_network(WaveguideKind::SemiInfinite, {{t1, t1, g1L, g1R}, {t2, t2, g2L, g2R}});
    // Term (conj(w_a) w_b) sits at d_a - d_b.
    expect_terms(pair_kernel(n, 0, 1), {{-std::sqrt(g1L * g2R), -(t1 + t2)},
                                        {std::sqrt(g1R * g2R), t1 - t2},
                                        {std::sqrt(g1L * g2L), t2 - t1},
                                        {-std::sqrt(g1R * g2L), t1 + t2}});
}

TEST(CommutatorKernel, OppositeDirectionsCommute) {
    const auto r = channel_kernel(atom_with({{1, 1, 0.2, 0.2}}), Channel::InfInputRight);
    const auto l = channel_kernel(atom_with({{2, 2, 0.2, 0.2}}), Channel::InfInputLeft);
    EXPECT_TRUE(commutator_kernel(r, l).empty());
    EXPECT_TRUE(commutator_kernel(channel_kernel(atom_with({{1, 1, 0.2, 0.2}}), Channel::InfRight),
                                  channel_kernel(atom_with({{2, 2, 0.2, 0.2}}), Channel::InfLeft))
                    .empty());
}

TEST(CommutatorKernel, HermitianSymmetryAndPositiveInstantTerm) {
    Gen g(21);
    for (int i = 0; i < 100; ++i) {
        const Network n = wgqed::testing::random_network(g, g.coin() ? WaveguideKind::SemiInfinite : WaveguideKind::Infinite);
        for (std::size_t j = 0; j < n.size(); ++j) {
            const auto self = pair_kernel(n, j, j);
            const cplx w0 = self.weight_at(0.0);
            EXPECT_NEAR(w0.imag(), 0.0, 1e-15);
            EXPECT_GE(w0.real(), 0.0);
            for (std::size_t l = 0; l < n.size(); ++l) {
                const auto k = pair_kernel(n, j, l), kt = pair_kernel(n, l, j);
                for (const auto& t : k.terms())
                    EXPECT_NEAR(std::abs(kt.weight_at(-t.delay) - std::conj(k.weight_at(t.delay))), 0, 1e-13);
            }
        }
    }
}

TEST(CommutatorKernel, Sesquilinear) {
    Gen g(8);
    for (int i = 0; i < 100; ++i) {
        std::vector<DeltaTerm> ta, tb;
        for (int m = 0; m < 3; ++m) ta.push_back({g.complex_normal(), g.uniform(-3, 3), 0.0});
        for (int m = 0; m < 3; ++m) tb.push_back({g.complex_normal(), g.uniform(-3, 3), 0.0});
        const cplx s = g.complex_normal();
        std::vector<DeltaTerm> tas = ta, tbs = tb;
        for (auto& t : tas) t.weight *= s;
        for (auto& t : tbs) t.weight *= s;
        const auto base = commutator_kernel(DelayKernel(ta), DelayKernel(tb));
        const auto left = commutator_kernel(DelayKernel(tas), DelayKernel(tb));
        const auto right = commutator_kernel(DelayKernel(ta), DelayKernel(tbs));
        ASSERT_EQ(base.size(), left.size());
        ASSERT_EQ(base.size(), right.size());
        for (std::size_t m = 0; m < base.size(); ++m) {
            EXPECT_NEAR(std::abs(left.terms()[m].weight - std::conj(s) * base.terms()[m].weight), 0, 1e-12);
            EXPECT_NEAR(std::abs(right.terms()[m].weight - s * base.terms()[m].weight), 0, 1e-12);
        }
    }
}

// Symbolic kernels against numerical integration of the mollified convolution.
TEST(CommutatorKernel, MatchesMollifiedIntegral) {
    Gen g(1234);
    for (int i = 0; i < 12; ++i) {
        const Network n = wgqed::testing::random_network(g, i % 2 ? WaveguideKind::Infinite : WaveguideKind::SemiInfinite);
        for (std::size_t j = 0; j < n.size(); ++j)
            for (std::size_t l = 0; l < n.size(); ++l) {
                const auto cmp = wgqed::testing::compare_to_clusters(pair_kernel(n, j, l), wgqed::testing::mollified_pair(n, j, l, 1e-3), 1e-3);
                EXPECT_TRUE(cmp.ok) << "network " << i << " pair " << j << "," << l << ": " << cmp.detail;
            }
    }
}

TEST(Markovian, SingleAtomOneDirectionBeforeMirror) {
    const auto v = is_markovian(point_network(WaveguideKind::SemiInfinite, {{1, 1, 0.2, 0.0}}));
    EXPECT_TRUE(v.markovian);
    EXPECT_FALSE(v.witness);
}

TEST(Markovian, TwoChiralAtomsOnOpenLine) {
    EXPECT_TRUE(is_markovian(point_network(WaveguideKind::Infinite, {{1, 1, 0.0, 0.2}, {2, 2, 0.2, 0.0}})).markovian);
}

TEST(Markovian, ThreeAtomsOpenLineWitness) {
    const auto v = is_markovian(point_network(WaveguideKind::Infinite, {{1, 1, 0.1, 0.1}, {2, 2, 0.2, 0.2}, {3.5, 3.5, 0.3, 0.3}}));
    ASSERT_FALSE(v.markovian);
    ASSERT_TRUE(v.witness);
    EXPECT_EQ(v.j, 0u);
    EXPECT_EQ(v.l, 1u);
    EXPECT_NEAR(v.witness->delay, 2.0 - 1.0, 1e-14);
}

TEST(Markovian, SemiInfiniteTruthTable) {
    const double rates[2] = {0.0, 0.3};
    for (int mask = 0; mask < 16; ++mask) {
        const Network n = point_network(WaveguideKind::SemiInfinite,
                                        {{1, 1, rates[mask & 1], rates[(mask >> 1) & 1]}, {2, 2, rates[(mask >> 2) & 1], rates[(mask >> 3) & 1]}});
        EXPECT_EQ(is_markovian(n).markovian, wgqed::testing::semi_markovian_by_rule(n)) << "mask " << mask;
    }
}

TEST(Markovian, CoLocatedSameDirectionPartnersStayMarkovian) {
    const Network n = point_network(WaveguideKind::SemiInfinite, {{1, 1, 0.2, 0.0}, {1, 1, 0.3, 0.0}});
    EXPECT_TRUE(is_markovian(n).markovian);
    EXPECT_TRUE(wgqed::testing::semi_markovian_by_rule(n));
}

TEST(Markovian, InvalidNetworkThrows) {
    EXPECT_THROW(is_markovian(Network{}), std::invalid_argument);
}

TEST(ItoTable, ClosedFormExamples) {
    const Network self = point_network(WaveguideKind::SemiInfinite, {{1, 1, 0.2, 0.2}});
    EXPECT_NEAR(ito_table(self, 0.5).entries(0, 0).real(), 0.4, 1e-15);

    const Network far = point_network(WaveguideKind::SemiInfinite, {{3, 3, 0.2, 0.2}, {5, 5, 0.2, 0.2}});
    EXPECT_EQ(ito_table(far, 0.5).entries(0, 1), cplx(0.0));

    const Network near = point_network(WaveguideKind::SemiInfinite, {{3, 3, 0.2, 0.2}, {3.3, 3.3, 0.2, 0.2}});
    EXPECT_NEAR(ito_table(near, 0.5).entries(0, 1).real(), 0.4, 1e-15);
}

TEST(ItoTable, RequiresStepBelowMirrorDelay) {
    const Network n = point_network(WaveguideKind::SemiInfinite, {{0.4, 0.4, 0.2, 0.2}});
    EXPECT_THROW(ito_table(n, 0.5), std::domain_error);
    EXPECT_THROW(ito_table(n, 0.4), std::domain_error);
    EXPECT_NO_THROW(ito_table(n, 0.3));
    EXPECT_NO_THROW(ito_table(point_network(WaveguideKind::Infinite, {{0.4, 0.4, 0.2, 0.2}}), 5.0));
}

TEST(ItoTable, BoundaryCountsAsInside) {
    const Network n = point_network(WaveguideKind::Infinite, {{1.0, 1.0, 0.1, 0.2}, {1.5, 1.5, 0.3, 0.4}});
    EXPECT_NE(ito_table(n, 0.5).entries(0, 1), cplx(0.0));
    EXPECT_EQ(ito_table(n, std::nextafter(0.5, 0.0) - 1e-11).entries(0, 1), cplx(0.0));
}

TEST(ItoTable, StepFunctionOfDt) {
    Gen g(4);
    for (int i = 0; i < 50; ++i) {
        wgqed::testing::NetworkShape s;
        s.max_points = 1;
        s.zero_rate_chance = 0.0;
        const Network n = wgqed::testing::random_network(g, WaveguideKind::Infinite, s);
        Eigen::MatrixXcd prev = ito_table(n, 1e-9).entries;
        // Small dt leaves only the instantaneous weights.
        for (std::size_t j = 0; j < n.size(); ++j)
            for (std::size_t l = 0; l < n.size(); ++l)
                EXPECT_EQ(prev(j, l), j == l ? pair_kernel(n, j, l).weight_at(0.0) : cplx(0.0));
        for (double dt = 0.01; dt < 6; dt += 0.01) {
            const Eigen::MatrixXcd cur = ito_table(n, dt).entries;
            for (std::size_t j = 0; j < n.size(); ++j)
                for (std::size_t l = 0; l < n.size(); ++l)
                    if (cur(j, l) != prev(j, l)) {
                        const double gap = std::abs(wgqed::testing::tau(n, j) - wgqed::testing::tau(n, l));
                        EXPECT_LE(gap, dt + 1e-12);
                        EXPECT_GT(gap, dt - 0.01 - 1e-12);
                    }
            prev = cur;
        }
    }
}

TEST(ItoTable, ZeroProductsExposed) {
    EXPECT_EQ(ItoTable::dB_dB, 0.0);
    EXPECT_EQ(ItoTable::dBdag_dBdag, 0.0);
    EXPECT_EQ(ItoTable::dBdag_dB, 0.0);
}

TEST(Gauge, SelfTermBeforeEcho) {
    const Network n = point_network(WaveguideKind::SemiInfinite, {{0.3 * pi, 0.3 * pi, 0.2, 0.2}});
    EXPECT_NEAR(std::abs(gauge_coefficients(n, 0.5 * pi)(0, 0) - cplx(0.2)), 0, 1e-15);
}

TEST(Gauge, SelfTermAfterEcho) {
    const Network n = point_network(WaveguideKind::SemiInfinite, {{0.3 * pi, 0.3 * pi, 0.2, 0.2}});
    const cplx expected = 0.2 - 0.2 * std::polar(1.0, 0.6 * pi);
    EXPECT_NEAR(std::abs(gauge_coefficients(n, 0.7 * pi)(0, 0) - expected), 0, 1e-15);
}

TEST(Gauge, ThreeAtomNeighbourTerm) {
    const Network n = preset("fig3a").network;
    const cplx expected = std::sqrt(0.1 * 0.2) * std::polar(1.0, pi);
    EXPECT_NEAR(std::abs(gauge_coefficients(n, 1.01 * pi)(0, 1) - expected), 0, 1e-15);
    EXPECT_EQ(gauge_coefficients(n, 0.99 * pi)(0, 1), cplx(0.0));
}

TEST(Gauge, ExplicitFrequencyOverridesStoredPhase) {
    const Network n = point_network(WaveguideKind::SemiInfinite, {{1.0, 0.0, 0.2, 0.2}});
    const cplx expected = 0.2 - 0.2 * std::polar(1.0, 3.0 * 2.0);
    EXPECT_NEAR(std::abs(gauge_coefficients(n, 10.0, 3.0)(0, 0) - expected), 0, 1e-15);
}

// Integral over [0, t] of the kernel with Gaussian-mollified deltas times e^{i phase}.
TEST(Gauge, MatchesMollifiedIntegral) {
    Gen g(77);
    const double sigma = 1e-3;
    for (int i = 0; i < 20; ++i) {
        const Network n = wgqed::testing::random_network(g, i % 2 ? WaveguideKind::Infinite : WaveguideKind::SemiInfinite);
        // Keep t well clear of every delay so the mollified mass is 0, 1/2 or 1.
        double t = 0;
        bool clear = false;
        while (!clear) {
            t = g.uniform(0.5, 10.0);
            clear = true;
            for (std::size_t j = 0; j < n.size(); ++j)
                for (std::size_t l = 0; l < n.size(); ++l)
                    for (const auto& term : pair_kernel(n, j, l).terms()) clear = clear && std::abs(t - term.delay) > 20 * sigma;
        }
        const Eigen::MatrixXcd A = gauge_coefficients(n, t);
        for (std::size_t j = 0; j < n.size(); ++j)
            for (std::size_t l = 0; l < n.size(); ++l) {
                cplx num = 0.0;
                for (const auto& term : pair_kernel(n, j, l).terms()) {
                    // Gaussian mass inside [0, t] centred on the delay.
                    const double mass = 0.5 * (std::erf((t - term.delay) / (sigma * std::sqrt(2.0))) -
                                               std::erf((0.0 - term.delay) / (sigma * std::sqrt(2.0))));
                    num += term.weight * mass * std::polar(1.0, term.phase);
                }
                EXPECT_NEAR(std::abs(A(j, l) - num), 0, 1e-9) << "pair " << j << "," << l;
            }
    }
}

// Only the fully activated matrix is a Markov rate matrix; partial sums can dip below zero.
TEST(Gauge, FullRateMatrixPositive) {
    Gen g(9);
    for (int i = 0; i < 200; ++i) {
        const Network n = wgqed::testing::random_network(g, g.coin() ? WaveguideKind::Infinite : WaveguideKind::SemiInfinite);
        const Eigen::MatrixXcd A = coefficient_table(n).full();
        const Eigen::MatrixXcd G = A.conjugate() + A.transpose();
        EXPECT_LT(max_abs(G - G.adjoint()), 1e-14);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
    }
}

TEST(Gauge, SinglePointDiagonalNeverNegative) {
    Gen g(10);
    wgqed::testing::NetworkShape s;
    s.max_points = 1;
    for (int i = 0; i < 200; ++i) {
        const Network n = wgqed::testing::random_network(g, WaveguideKind::SemiInfinite, s);
        const auto tab = coefficient_table(n);
        for (double t : tab.activations()) {
            const Eigen::MatrixXcd A = tab.matrix(t);
            for (Eigen::Index j = 0; j < A.rows(); ++j) EXPECT_GE(A(j, j).real(), -1e-15);
        }
    }
}
