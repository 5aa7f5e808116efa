#include "examples.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

using namespace gqtest;

namespace {

// Fubini-Study density of l*omega_FS on C^n in real coordinates: (2l)^n / (1 + |w|^2)^{n+1}
double fs_density(int n, int l, const Vec& x) { return std::pow(2.0 * l, n) / std::pow(1.0 + x.squaredNorm(), n + 1); }

// volume of CP^n from the radial integral of the density above
double fs_volume_radial(int n, int l) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    double sphere = 2.0 * std::pow(kPi, n) / std::tgamma(n);  // area of S^{2n-1}
    // r = tan(t): r^{2n-1} dr / (1 + r^2)^{n+1} = sin^{2n-1}(t) cos(t) dt
    return sphere * std::pow(2.0 * l, n) *
           GK::integrate([&](double t) { return std::pow(std::sin(t), 2 * n - 1) * std::cos(t); }, 0.0, kPi / 2, 10,
                         1e-13);
}

std::vector<Model> all_models() {
    return {e1().model, e2().model, e3().model, make_model({1, 2}, {2, 3})};
}

} // namespace

TEST(KahlerModels, ConstructionChecks) {
    EXPECT_THROW(make_model({}, {}), ConfigError);
    EXPECT_THROW(make_model({1}, {1, 2}), ConfigError);
    EXPECT_THROW(make_model({0}, {1}), ConfigError);
    EXPECT_THROW(make_model({1}, {0}), ConfigError);
    EXPECT_TRUE(make_model({1, 3}, {1, 1}).metaplectic_allowed);
    EXPECT_FALSE(make_model({2}, {1}).metaplectic_allowed);
    EXPECT_FALSE(make_model({1, 2}, {1, 1}).metaplectic_allowed);
    EXPECT_THROW(make_point(e1().model, CVec::Zero(2)), ConfigError);
    EXPECT_THROW(make_point(e1().model, CVec::Ones(3)), ConfigError);
}

TEST(KahlerModels, CanonicalRepresentative) {
    Model m = e3().model;
    CVec z(4);
    z << cplx(0, 2), 1.0, cplx(-3, 0), cplx(0, 4);
    PointM p = make_point(m, z);
    PointM q = make_point(m, cplx(0.3, -1.7) * z);
    EXPECT_TRUE(same_point(m, p, q));
    EXPECT_NEAR(p.z.segment(0, 2).norm(), 1.0, 1e-15);
    EXPECT_NEAR(p.z.segment(2, 2).norm(), 1.0, 1e-15);
    EXPECT_GT(p.z[0].real(), 0.0);
    EXPECT_EQ(p.z[0].imag(), 0.0);
    EXPECT_LT(point_distance(m, p, q), 1e-7);
}

TEST(KahlerModels, CompatibilityAtRandomPoints) {
    auto rng = make_rng(3);
    for (const auto& m : all_models())
        for (int i = 0; i < 20; ++i) {
            auto f = frame_at(m, random_point(m, rng));
            EXPECT_LT(compatibility_residual(f), 1e-12);
            EXPECT_EQ(f.B.rows(), 2 * m.dim());
        }
}

TEST(KahlerModels, ProductMetricIsBlockDiagonal) {
    Model m = e3().model;
    auto rng = make_rng(4);
    auto f = frame_at(m, random_point(m, rng));
    // basis pairs of the first factor come first
    EXPECT_LT(f.B.block(0, 2, 2, 2).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT(f.omega.block(0, 2, 2, 2).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(KahlerModels, ChartDensityMatchesFubiniStudy) {
    auto rng = make_rng(5);
    std::normal_distribution<double> g;
    for (int n : {1, 2, 3})
        for (int l : {1, 2}) {
            Model m = make_model({n}, {l});
            Chart c;
            c.index = {0};
            for (int i = 0; i < 10; ++i) {
                Vec x(2 * n);
                for (int a = 0; a < 2 * n; ++a) x[a] = 1.5 * g(rng);
                EXPECT_NEAR(chart_density(m, c, x) / fs_density(n, l, x), 1.0, 1e-12);
            }
        }
}

TEST(KahlerModels, VolumeAgainstRadialQuadrature) {
    for (int n : {1, 2})
        for (int l : {1, 2}) {
            Model m = make_model({n}, {l});
            EXPECT_NEAR(exact_volume(m), fs_volume_radial(n, l), 1e-9 * exact_volume(m));
        }
    EXPECT_NEAR(exact_volume(e3().model), fs_volume_radial(1, 1) * fs_volume_radial(1, 1), 1e-9);
}

TEST(KahlerModels, MonteCarloVolume) {
    for (const auto& m : all_models()) {
        QuadratureConfig q;
        q.samples = 200000;
        auto e = liouville_volume(m, q);
        double exact = m == make_model({1, 2}, {2, 3})
                           ? fs_volume_radial(1, 2) * fs_volume_radial(2, 3)
                           : exact_volume(m);
        EXPECT_LT(std::abs(e.value - exact), 4.0 * e.error) << e.value << " vs " << exact;
    }
    QuadratureConfig bad;
    bad.samples = 0;
    EXPECT_THROW(liouville_volume(e1().model, bad), ConfigError);
}

TEST(KahlerModels, MonteCarloErrorShrinks) {
    QuadratureConfig a, b;
    a.samples = 20000;
    b.samples = 320000;
    auto ea = liouville_volume(e2().model, a), eb = liouville_volume(e2().model, b);
    EXPECT_NEAR(ea.error / eb.error, 4.0, 0.6);
}

TEST(KahlerModels, Prequantum) {
    auto rng = make_rng(6);
    for (const auto& m : all_models())
        for (int k : {1, 3})
            for (int i = 0; i < 5; ++i) {
                PointM p = random_point(m, rng);
                EXPECT_LT(check_prequantum(m, k, p), 1e-6);
                // the check has power: the curvature is not (k+1) omega
                Chart c = best_chart(m, p);
                Mat W = chart_omega(m, c, to_chart(m, c, p));
                EXPECT_GT((curvature_form(m, k, p) - (k + 1.0) * W).cwiseAbs().maxCoeff(), 0.1);
            }
    EXPECT_THROW(check_prequantum(e1().model, 0, pt(e1().model, {1.0, 1.0})), ConfigError);
}

TEST(KahlerModels, HamiltonianFieldsPreserveVolume) {
    auto rng = make_rng(7);
    for (auto A : {e1(), e2(), e3()}) {
        Vec xi = Vec::Constant(1, 0.8);
        VectorField X = [&](const PointM& q) { return field_X(A, xi, q); };
        for (int i = 0; i < 5; ++i) {
            PointM p = random_point(A.model, rng);
            EXPECT_NEAR(divergence_liouville(A.model, X, p), 0.0, 1e-6);
            EXPECT_NEAR(divergence_chart(A.model, X, p), 0.0, 1e-6);
        }
    }
    VectorField zero = [](const PointM& q) { return CVec(CVec::Zero(q.z.size())); };
    PointM p = pt(e2().model, {1.0, 2.0, 3.0});
    EXPECT_NEAR(divergence_liouville(e2().model, zero, p), 0.0, 1e-12);
}

TEST(KahlerModels, DivergenceOfGradientField) {
    // div(J X^xi) = -2 (n+1) (psi - mean) with psi = -sum <W_i,xi>|z_i|^2 and mean the plain average
    auto rng = make_rng(8);
    for (auto A : {e1(), e2(), e3()}) {
        const Model& m = A.model;
        Vec xi = Vec::Constant(1, -0.6);
        VectorField JX = [&](const PointM& q) { return CVec(cplx(0, 1) * field_X(A, xi, q)); };
        for (int i = 0; i < 5; ++i) {
            PointM p = random_point(m, rng);
            double oracle = 0.0;
            for (int j = 0; j < m.num_factors(); ++j) {
                double psi = 0.0, mean = 0.0;
                for (int c = m.offset(j); c < m.offset(j) + m.block_size(j); ++c) {
                    psi -= A.weight(c).dot(xi) * std::norm(p.z[c]);
                    mean -= A.weight(c).dot(xi) / m.block_size(j);
                }
                oracle += -2.0 * m.block_size(j) * (psi - mean);
            }
            EXPECT_NEAR(divergence_liouville(m, JX, p), oracle, 1e-6);
            EXPECT_NEAR(divergence_chart(m, JX, p), oracle, 1e-5);
            EXPECT_NEAR(divergence_JX(A, xi, p), oracle, 1e-6);
        }
    }
}

TEST(KahlerModels, RandomPointsAreUniform) {
    // |z_0|^2 is Beta(1, n) under the Fubini-Study measure: mean 1/(n+1)
    Model m = e2().model;
    auto rng = make_rng(9);
    std::vector<double> v;
    for (int i = 0; i < 100000; ++i) v.push_back(std::norm(random_point(m, rng).z[0]));
    auto e = mean_stderr(v);
    EXPECT_LT(std::abs(e.value - 1.0 / 3.0), 4 * e.error);
}
