#include "examples.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace gqtest;

namespace {

// Rank one: the moment image of the face M_s is the Minkowski sum over factors of the intervals
// [min, max] of -l_j W_i (i in s_j), shifted by -c. s is a stratum support iff 0 lies in its
// relative interior.
std::set<std::string> interval_oracle(const WeightAction& A) {
    const Model& m = A.model;
    std::set<std::string> out;
    for (const auto& s : all_supports(m)) {
        double lo = -A.c()[0], hi = -A.c()[0];
        for (int j = 0; j < m.num_factors(); ++j) {
            double a = 1e300, b = -1e300;
            for (int i = m.offset(j); i < m.offset(j) + m.block_size(j); ++i)
                if (s[i]) {
                    double w = -m.bundle_degrees[j] * double(A.W(0, i));
                    a = std::min(a, w);
                    b = std::max(b, w);
                }
            lo += a;
            hi += b;
        }
        bool in = lo == hi ? std::abs(lo) < 1e-12 : (lo < 0 && 0 < hi);
        if (in) out.insert(support_string(m, s));
    }
    return out;
}

std::set<std::string> labels(const WeightAction& A) {
    std::set<std::string> out;
    for (const auto& L : combinatorial_strata(A)) out.insert(support_string(A.model, L.support));
    return out;
}

// zero of phi along the single ray exp(i s xi_hat) x (rank one, phi monotone in s)
PointM ray_oracle(const WeightAction& A, const PointM& x) {
    Vec e = algebra_frame(Mat::Identity(1, 1)).col(0);
    auto ph = [&](double s) { return moment_map(A, imaginary_flow(A, Vec(s * e), 1.0, x))[0]; };
    double lo = -1.0, hi = 1.0;
    while (ph(lo) > 0) lo *= 2;
    while (ph(hi) < 0) hi *= 2;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        (ph(mid) < 0 ? lo : hi) = mid;
    }
    return imaginary_flow(A, Vec(0.5 * (lo + hi) * e), 1.0, x);
}

} // namespace

TEST(StrataFlow, StrataMatchIntervalOracle) {
    for (auto A : {e1(), e2(), e3(), e3(Rational{1, 2})}) EXPECT_EQ(labels(A), interval_oracle(A));
    EXPECT_EQ(labels(e2()), (std::set<std::string>{"111", "110", "001"}));
    EXPECT_EQ(labels(e3(Rational{1, 2})), (std::set<std::string>{"11|11", "11|10", "01|11"}));
}

TEST(StrataFlow, StratumLabelsE1E2) {
    auto s1 = combinatorial_strata(e1());
    ASSERT_EQ(s1.size(), 1u);
    EXPECT_EQ(s1[0].isotropy.finite_part, 2);
    EXPECT_EQ(s1[0].isotropy.dim(), 0);
    EXPECT_EQ(s1[0].dim_S, 0);

    auto A = e2();
    auto s2 = combinatorial_strata(A);
    ASSERT_EQ(s2.size(), 3u);
    const auto& free = stratum(s2, A.model, "111");
    const auto& z2 = stratum(s2, A.model, "110");
    const auto& full = stratum(s2, A.model, "001");
    EXPECT_EQ(free.dim_S, 1);
    EXPECT_EQ(z2.dim_S, 0);
    EXPECT_EQ(full.dim_S, 0);
    EXPECT_EQ(free.isotropy.finite_part, 1);
    EXPECT_EQ(z2.isotropy.finite_part, 2);
    EXPECT_TRUE(full.isotropy.is_full);
    // distinct isotropy types, so every component id is 0
    for (const auto& L : s2) EXPECT_EQ(L.component_id, 0);
    // open stratum listed first
    EXPECT_EQ(support_string(A.model, s2[0].support), "111");
}

TEST(StrataFlow, ComponentIdsSeparateEqualIsotropy) {
    auto s = combinatorial_strata(e3());
    const auto& a = stratum(s, e3().model, "10|10");
    const auto& b = stratum(s, e3().model, "01|01");
    EXPECT_TRUE(a.isotropy.is_full && b.isotropy.is_full);
    EXPECT_NE(a.component_id, b.component_id);
}

TEST(StrataFlow, FlowFixesZeroLevel) {
    auto A = e2();
    auto rng = make_rng(41);
    PointM u = e2_level_point(rng);
    auto r = kirwan_flow(A, u);
    EXPECT_EQ(r.status, FlowStatus::semistable);
    EXPECT_EQ(r.steps, 0);
    EXPECT_TRUE(same_point(A.model, *r.limit, u));
    EXPECT_THROW(kirwan_flow(A, u, 0.0), ConfigError);
}

TEST(StrataFlow, FlowToFixedPoint) {
    auto A = e2();
    for (auto p : {pt(A.model, {1.0, 0.0, 1.0}), pt(A.model, {0.0, 2.0, 1.0})}) {
        auto r = kirwan_flow(A, p);
        ASSERT_EQ(r.status, FlowStatus::semistable);
        EXPECT_LT(point_distance(A.model, *r.limit, pt(A.model, {0.0, 0.0, 1.0})), 1e-6);
        EXPECT_TRUE(r.monotone);
        EXPECT_EQ(is_semistable(A, p), Semistability::semistable_strict);
    }
}

TEST(StrataFlow, Unsemistable) {
    auto A = e1();
    auto r = kirwan_flow(A, pt(A.model, {1.0, 0.0}));
    EXPECT_EQ(r.status, FlowStatus::unsemistable);
    EXPECT_EQ(is_semistable(A, pt(A.model, {1.0, 0.0})), Semistability::unsemistable);
    EXPECT_EQ(is_semistable(e2(), pt(e2().model, {0.0, 1.0, 0.0})), Semistability::unsemistable);
    EXPECT_EQ(is_semistable(A, pt(A.model, {1.0, 0.2})), Semistability::stable);
}

TEST(StrataFlow, RandomPointsAgainstRayOracle) {
    auto A = e2();
    auto rng = make_rng(42);
    for (int i = 0; i < 30; ++i) {
        PointM x = random_point(A.model, rng);
        auto r = kirwan_flow(A, x);
        ASSERT_EQ(r.status, FlowStatus::semistable);
        EXPECT_LT(point_distance(A.model, *r.limit, ray_oracle(A, x)), 1e-6);
        for (std::size_t s = 1; s < r.history.size(); ++s) EXPECT_LE(r.history[s], r.history[s - 1]);
        EXPECT_LT(moment_map(A, *r.limit).norm(), 1e-8);
    }
}

TEST(StrataFlow, FlowIsEquivariant) {
    auto A = e3();
    auto rng = make_rng(43);
    for (int i = 0; i < 5; ++i) {
        PointM x = random_point(A.model, rng);
        Vec th = Vec::Constant(1, 1.7);
        auto a = kirwan_flow(A, torus_act(A, th, x));
        auto b = kirwan_flow(A, x);
        ASSERT_TRUE(a.limit && b.limit);
        EXPECT_LT(point_distance(A.model, *a.limit, torus_act(A, th, *b.limit)), 1e-6);
    }
}

TEST(StrataFlow, LimitsLandInPredictedStrata) {
    for (auto A : {e1(), e2(), e3(), e3(Rational{1, 2})}) {
        auto rep = enumerate_strata(A);
        int total = 0;
        for (int c : rep.sample_counts) total += c;
        EXPECT_GT(total, 0);
        for (int c : rep.sample_counts) EXPECT_GT(c, 0);
    }
    // no zero level at all: shift outside the moment image
    auto bad = make_action(make_model({1}, {1}), row({1, -1}), {Rational{2, 1}});
    EXPECT_THROW(enumerate_strata(bad), ConfigError);
}

TEST(StrataFlow, ExtraPieces) {
    auto A = e2();
    auto s = combinatorial_strata(A);
    EXPECT_TRUE(decompose_preimage(A, stratum(s, A.model, "111")).pieces.empty());
    EXPECT_TRUE(decompose_preimage(A, stratum(s, A.model, "110")).pieces.empty());
    auto dec = decompose_preimage(A, stratum(s, A.model, "001"));
    std::set<std::string> sup;
    for (const auto& p : dec.pieces) {
        sup.insert(support_string(A.model, p.support));
        EXPECT_EQ(p.isotropy_prime.dim(), 0);
        EXPECT_EQ(p.dim_piece, 1);
        // the level is in the open image of the piece
        EXPECT_EQ(feasible_support(A, p.support, p.level), p.support);
    }
    EXPECT_EQ(sup, (std::set<std::string>{"101", "011"}));

    // points of the pieces stay off the zero level and flow to the parent stratum
    auto rng = make_rng(44);
    std::normal_distribution<double> g;
    for (const auto& p : dec.pieces)
        for (int i = 0; i < 10; ++i) {
            CVec z = CVec::Zero(3);
            for (int c = 0; c < 3; ++c)
                if (p.support[c]) z[c] = cplx(g(rng), g(rng));
            PointM x = make_point(A.model, z);
            EXPECT_GT(std::abs(moment_map(A, x)[0]), 1e-6);
            auto r = kirwan_flow(A, x);
            ASSERT_TRUE(r.limit);
            EXPECT_EQ(support_of(*r.limit, 1e-6), p.parent);
        }

    int total = 0;
    auto s3 = combinatorial_strata(e3());
    for (const auto& L : s3) total += int(decompose_preimage(e3(), L).pieces.size());
    EXPECT_EQ(total, 4);
    EXPECT_TRUE(decompose_preimage(e1(), combinatorial_strata(e1())[0]).pieces.empty());
}

TEST(StrataFlow, StratumVolumes) {
    // int_S eps_S from Duistermaat-Heckman: for rank one the measure of {|phi| < delta} is
    // 2 delta vol(M) h(0) with h the DH density, and int_S eps_S = finite_part vol(M) h(0) / (2 pi).
    // E2: h(t) = 1 - |t| (tent), E3: also 1 - |t|. Points carry weight 1.
    auto A2 = e2();
    auto s2 = combinatorial_strata(A2);
    auto w = [&](const WeightAction& A, const StratumLabel& L) {
        auto q = stratum_quadrature(A, L);
        double t = 0.0;
        for (double v : q.weights) t += v;
        return t;
    };
    EXPECT_NEAR(w(A2, stratum(s2, A2.model, "111")), 2 * kPi * kPi / kTwoPi, 1e-8);
    EXPECT_NEAR(w(A2, stratum(s2, A2.model, "110")), 1.0, 1e-14);
    EXPECT_NEAR(w(A2, stratum(s2, A2.model, "001")), 1.0, 1e-14);
    auto A3 = e3();
    EXPECT_NEAR(w(A3, stratum(combinatorial_strata(A3), A3.model, "11|11")), 4 * kPi * kPi / kTwoPi, 1e-8);
    EXPECT_NEAR(w(e1(), combinatorial_strata(e1())[0]), 1.0, 1e-14);

    // sampler spreads the same total over random phases
    auto smp = sample_stratum(A2, stratum(s2, A2.model, "111"), 3, 9);
    double t = 0.0;
    for (double v : smp.weights) t += v;
    EXPECT_NEAR(t, kPi, 1e-8);
    for (const auto& p : smp.points) EXPECT_LT(moment_map(A2, p).norm(), 1e-10);
    EXPECT_THROW(sample_stratum(A2, s2[0], 0, 1), ConfigError);
}

TEST(StrataFlow, StratumVolumeShellMonteCarlo) {
    // same quantity without the DH density: count samples in a thin shell around the zero level
    auto A = e2();
    const double delta = 0.002;
    auto rng = make_rng(45);
    std::vector<double> hit;
    for (int i = 0; i < 2000000; ++i) hit.push_back(std::abs(moment_map(A, random_point(A.model, rng))[0]) < delta);
    auto e = mean_stderr(hit);
    // correct the tent's average over the shell
    double est = exact_volume(A.model) * e.value / (4 * kPi * delta) / (1 - delta / 2);
    double err = exact_volume(A.model) * e.error / (4 * kPi * delta);
    auto q = stratum_quadrature(A, combinatorial_strata(A)[0]);
    double t = 0.0;
    for (double v : q.weights) t += v;
    EXPECT_LT(std::abs(est - t), 4 * err) << est << " vs " << t;
}
