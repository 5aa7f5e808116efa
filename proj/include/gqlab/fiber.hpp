#pragma once

// Integrals over m of tau(xi, u) exp(-k f(xi, u) - g(xi, u)), the fibre part of the coarea
// decomposition of G_C-saturated sets.

#include "torus_actions.hpp"

namespace gqlab {

struct FiberOptions {
    double rel_tol = 1e-9;
    unsigned max_depth = 15;
    int angular_start = 16;      // trapezoid nodes on the circle when dim m = 2
    double radius = -1.0;        // truncate to |xi| <= radius when positive
    bool use_tau = true;         // false: replace tau by tau(0, u)
    bool quadratic_f = false;    // true: replace f by its Hessian quadratic form
    bool definitional = false;   // true: f and g by quadrature along the flow (slow)
};

struct FiberContext {
    const WeightAction* action = nullptr;
    Mat Xi;                     // orthonormal frame of m (algebra units)
    PointM u;
    std::vector<CVec> slice;    // orthonormal tangent basis of the slice set at u
    Mat gram0;                  // B(JX^{xi_a}, JX^{xi_b}) at u
    double tau0 = 1.0;
};

inline FiberContext make_fiber_context(const WeightAction& A, const Mat& Xi, const PointM& u,
                                       const std::vector<bool>& support) {
    FiberContext c;
    c.action = &A;
    c.Xi = Xi;
    c.u = u;
    c.slice = level_tangent_basis(A, u, support, Xi);
    c.gram0 = field_gram(A, Xi, u);
    c.tau0 = Xi.cols() ? std::sqrt(std::max(0.0, c.gram0.determinant())) : 1.0;
    return c;
}

inline double fiber_integrand(const FiberContext& c, const Vec& coef, int k, Twist tw, const FiberOptions& o) {
    const WeightAction& A = *c.action;
    Vec xi = c.Xi * coef;
    double f = o.quadratic_f    ? coef.dot(c.gram0 * coef)
               : o.definitional ? flow_potential_value(A, xi, c.u)
                                : flow_potential_closed(A, xi, c.u);
    double e = double(k) * f;
    if (tw == Twist::halfform)
        e += o.definitional ? halfform_exponent(A, xi, c.u) : halfform_exponent_closed(A, xi, c.u);
    if (e > 300.0) return 0.0;  // negligible; tau itself underflows out here
    double tau = o.use_tau ? jacobian_tau(A, xi, c.u, c.Xi, c.slice) : c.tau0;
    return tau * std::exp(-e);
}

/// int_m tau e^{-k f (- g)} dvol(m); error from the adaptive radial rule.
inline Estimate fiber_integral(const FiberContext& c, int k, Twist tw, const FiberOptions& o = {}) {
    const Eigen::Index m = c.Xi.cols();
    if (m == 0) return {1.0, 0.0};
    if (m > 2) throw NumericalError("fibre integrals need dim m <= 2");
    Eigen::SelfAdjointEigenSolver<Mat> es(c.gram0);
    double lam = std::max(es.eigenvalues().minCoeff(), 1e-300);
    double L = 1.0 / std::sqrt(std::max(1, k) * lam);
    double upper = o.radius > 0 ? o.radius / L : std::numeric_limits<double>::infinity();
    using GK = boost::math::quadrature::gauss_kronrod<double, 21>;
    auto radial = [&](const Vec& dir, double power) {
        double err = 0.0;
        auto g = [&](double s) {
            if (s == 0.0 && power > 0) return 0.0;
            double v = fiber_integrand(c, Vec(s * L * dir), k, tw, o);
            return std::pow(s * L, power) * v * L;
        };
        double v = GK::integrate(g, 0.0, upper, o.max_depth, o.rel_tol, &err);
        if (!std::isfinite(v)) throw NumericalError("fibre integral is not finite");
        return Estimate{v, err};
    };
    if (m == 1) {
        Vec d(1);
        d[0] = 1.0;
        auto a = radial(d, 0.0);
        auto b = radial(Vec(-d), 0.0);
        return {a.value + b.value, std::hypot(a.error, b.error)};
    }
    // m = 2: periodic trapezoid in the angle, doubled until stable
    auto ring = [&](int n) {
        double s = 0.0, e2 = 0.0;
        for (int i = 0; i < n; ++i) {
            double th = kTwoPi * (i + 0.5) / n;
            Vec d(2);
            d << std::cos(th), std::sin(th);
            auto r = radial(d, 1.0);
            s += r.value;
            e2 += r.error * r.error;
        }
        return Estimate{s * kTwoPi / n, std::sqrt(e2) * kTwoPi / n};
    };
    int n = o.angular_start;
    Estimate prev = ring(n);
    for (int it = 0; it < 5; ++it) {
        n *= 2;
        Estimate cur = ring(n);
        double diff = std::abs(cur.value - prev.value);
        if (diff <= 10 * o.rel_tol * std::abs(cur.value)) return {cur.value, std::max(cur.error, diff)};
        prev = cur;
    }
    throw NumericalError("angular quadrature over m did not converge");
}

} // namespace gqlab
