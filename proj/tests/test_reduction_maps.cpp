#include "examples.hpp"

#include <gtest/gtest.h>

using namespace gqtest;

namespace {

std::vector<PointM> stratum_points(const WeightAction& A, const StratumLabel& L, int n, std::uint64_t seed) {
    auto smp = sample_stratum(A, L, 1, seed);
    std::vector<PointM> out;
    const std::size_t step = std::max<std::size_t>(1, smp.points.size() / n);
    for (std::size_t i = 0; i < smp.points.size() && int(out.size()) < n; i += step) out.push_back(smp.points[i]);
    return out;
}

} // namespace

TEST(ReductionMaps, DescentIdentityIsExact) {
    auto A = e2();
    auto strata = combinatorial_strata(A);
    auto basis = invariant_basis(A, 4, Twist::plain);
    for (const auto& L : strata)
        for (const auto& x : stratum_points(A, L, 10, 3))
            for (const auto& s : basis) EXPECT_EQ(pointwise_descended_norm(A, s, x), pointwise_norm(A.model, s, x));
    auto B = e3();
    auto hb = invariant_basis(B, 4, Twist::halfform);
    for (const auto& L : combinatorial_strata(B))
        for (const auto& x : stratum_points(B, L, 5, 4))
            for (const auto& s : hb)
                EXPECT_EQ(pointwise_descended_norm(B, s, x), descent_factor(B, x) * pointwise_norm(B.model, s, x));
    EXPECT_THROW(pointwise_descended_norm(A, basis[0], pt(A.model, {1.0, 0.0, 1.0})), ConfigError);
}

TEST(ReductionMaps, DescendChecksInvariance) {
    auto A = e2();
    auto basis = invariant_basis(A, 4, Twist::plain);
    auto r = descend(A, basis[1]);
    ASSERT_EQ(r.points.size(), r.values.size());
    for (std::size_t i = 0; i < r.points.size(); ++i)
        EXPECT_EQ(r.values[i], pointwise_norm(A.model, basis[1], r.points[i]));
    SectionPoly zero = basis[0];
    for (auto& [e, c] : zero.coeffs) c = 0.0;
    for (double v : descend(A, zero).values) EXPECT_EQ(v, 0.0);
    SectionPoly bad = basis_sections(A.model, 4, Twist::plain)[0];  // z0^4, weight 4
    EXPECT_THROW(descend(A, bad), ConfigError);
}

TEST(ReductionMaps, DescentFactorAgainstContraction) {
    struct Case {
        WeightAction A;
        std::string label;
    };
    for (const auto& c : {Case{e1(), "11"}, Case{e2(), "111"}, Case{e2(), "110"}, Case{e3(), "11|11"},
                          Case{e3(Rational{1, 2}), "11|11"}, Case{e3(Rational{1, 2}), "01|11"}}) {
        auto strata = combinatorial_strata(c.A);
        const auto& L = stratum(strata, c.A.model, c.label);
        for (const auto& x : stratum_points(c.A, L, 10, 7)) {
            auto rep = contraction_oracle(c.A, x);
            EXPECT_LT(rep.rel_dev, 1e-3) << c.label;
            if (L.isotropy.finite_part == 1) {
                EXPECT_NEAR(rep.contraction / rep.predicted, 1.0, 1e-3);
            }
        }
    }
    auto full = contraction_oracle(e2(), pt(e2().model, {0.0, 0.0, 1.0}));
    EXPECT_EQ(full.factor, 1.0);
    EXPECT_EQ(full.factor_oracle, 1.0);
}

TEST(ReductionMaps, ContractionConstantAlongOrbits) {
    auto A = e2();
    auto rng = make_rng(61);
    for (int i = 0; i < 5; ++i) {
        PointM x = e2_level_point(rng);
        PointM gx = torus_act(A, Vec::Constant(1, 2.5), x);
        EXPECT_NEAR(contraction_oracle(A, x).contraction, contraction_oracle(A, gx).contraction, 1e-9);
        EXPECT_NEAR(descent_factor(A, x), descent_factor(A, gx), 1e-12);
    }
}

TEST(ReductionMaps, ReducedGramAgainstBetaIntegrals) {
    // E2: on S the residual rotation of z2 has moment |z2|^2 = t, so eps_S pushes forward to
    // pi dt on [0,1]; for z0^a z1^a z2^{k-2a}, |s|^2 = ((1-t)/2)^{2a} t^{k-2a}.
    {
        const int k = 4;
        auto R = reduced_gram(e2(), k, Twist::plain, 1);
        ASSERT_EQ(R.basis_ids.size(), 3u);
        for (std::size_t i = 0; i < R.basis_ids.size(); ++i) {
            int a = R.basis_ids[i][0];
            double exact = prefactor(k, 1) * kPi * std::pow(0.5, 2 * a) * std::beta(2 * a + 1.0, k - 2 * a + 1.0);
            EXPECT_NEAR(R.matrix(i, i).real(), exact, 1e-8 * exact) << a;
        }
        // the second definition adds the point strata: [1:1:0] with isotropy Z2 and [0:0:1]
        auto R2 = reduced_gram(e2(), k, Twist::plain, 2);
        for (std::size_t i = 0; i < R.basis_ids.size(); ++i) {
            int a = R.basis_ids[i][0];
            double add = (a == 2 ? std::pow(0.5, k) : 0.0) + (a == 0 ? 1.0 : 0.0);
            EXPECT_NEAR(R2.matrix(i, i).real() - R.matrix(i, i).real(), add, 1e-12);
        }
    }
    // E3 half-form: t = |z0|^2 = |w0|^2 on the zero level, eps_S -> 2 pi dt, vol(G x) = 4 pi sqrt(t(1-t)),
    // s = z0^a z1^{3-a} w0^a w1^{3-a} at k = 4 with |s|^2 = t^{2a} (1-t)^{6-2a}
    {
        const int k = 4;
        auto R = reduced_gram(e3(), k, Twist::halfform, 1);
        ASSERT_EQ(R.basis_ids.size(), 4u);
        for (std::size_t i = 0; i < R.basis_ids.size(); ++i) {
            int a = R.basis_ids[i][0];
            double exact = prefactor(k, 1) * kTwoPi * std::pow(2.0, -0.5) * 4 * kPi *
                           std::beta(2 * a + 1.5, 7.5 - 2 * a);
            EXPECT_NEAR(R.matrix(i, i).real(), exact, 1e-6 * exact) << a;
        }
    }
    // E1: the reduced space is a point of weight 1, the half-form factor is 2^{-1/2} vol = pi
    auto R1 = reduced_gram(e1(), 2, Twist::plain, 1);
    EXPECT_NEAR(R1.matrix(0, 0).real(), 0.25, 1e-14);  // |z0 z1|^2 at |z0| = |z1|
    auto H1 = reduced_gram(e1(), 3, Twist::halfform, 1);
    EXPECT_NEAR(H1.matrix(0, 0).real(), kPi * 0.25, 1e-9);
}

TEST(ReductionMaps, ReducedGramRepresentativeIndependence) {
    for (auto tw : {Twist::plain, Twist::halfform}) {
        auto a = reduced_gram(e3(), 6, tw, 2, 61), b = reduced_gram(e3(), 6, tw, 2, 31);
        for (Eigen::Index i = 0; i < a.matrix.rows(); ++i) {
            double tol = 3 * std::hypot(a.error(i, i), b.error(i, i)) + 1e-10 * a.matrix(i, i).real();
            EXPECT_NEAR(a.matrix(i, i).real(), b.matrix(i, i).real(), tol);
        }
    }
}

TEST(ReductionMaps, DescentIsInjective) {
    for (int k : {4, 8}) {
        auto R = reduced_gram(e2(), k, Twist::plain, 1);
        Eigen::SelfAdjointEigenSolver<CMat> es(R.matrix);
        EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
    }
    EXPECT_THROW(reduced_gram(e1(), 3, Twist::plain, 1), ConfigError);
}

TEST(ReductionMaps, MapMatrix) {
    for (int k : {10, 20}) {
        auto M = map_matrix(e3(), k, Twist::plain);
        EXPECT_EQ(M.dim_up, int(invariant_basis(e3(), k, Twist::plain).size()));
        EXPECT_EQ(M.dim_up, M.dim_down);
        EXPECT_TRUE(M.matrix.isIdentity());
        // without the twist the norm decays along rays as soon as phi_xi > 0
        EXPECT_EQ(M.k0, 1);
        EXPECT_LE(M.max_rate, 0.0);
        auto H = map_matrix(e3(), k, Twist::halfform);
        EXPECT_GE(H.k0, 1);
        if (k >= H.k0) {
            EXPECT_LE(H.max_rate, 0.0);
        }
    }
}
