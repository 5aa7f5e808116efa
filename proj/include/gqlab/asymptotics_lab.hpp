#pragma once

#include "reduction_maps.hpp"

namespace gqlab {

struct CurvePoint {
    int k = 0;
    double value = 0.0;
    double error = 0.0;
};

struct DensityCurve {
    std::string quantity;  // I, J, II, II_tilde, defect_A, defect_B
    std::string stratum;
    std::vector<CurvePoint> points;
    bool has_rate = false;
    double rate_C = 0.0, rate_p = 0.0;  // |value - limit| ~ C k^{-p}
};

/// Fits |value - limit| = C k^{-p} on the points with a positive gap.
inline void fit_rate(DensityCurve& c, double limit) {
    std::vector<double> x, y;
    for (const auto& p : c.points) {
        double gap = std::abs(p.value - limit);
        if (gap > 0) {
            x.push_back(std::log(double(p.k)));
            y.push_back(std::log(gap));
        }
    }
    if (x.size() < 2) return;
    auto f = fit_line(x, y);
    c.has_rate = true;
    c.rate_C = std::exp(f.intercept);
    c.rate_p = -f.slope;
}

// ---------------------------------------------------------------------------------------------
// Densities on a stratum point x (isotropy must be that of the label).

inline FiberContext stratum_context(const WeightAction& A, const StratumLabel& L, const PointM& x) {
    if (support_of(x) != L.support) throw ConfigError("point does not lie on the stratum");
    Mat Xi = algebra_frame(complement_basis(L.isotropy, A.d));
    return make_fiber_context(A, Xi, x, L.support);
}

/// vol(G x) (k/2pi)^{m/2} int_m tau e^{-k f}; 1 when H = G.
inline Estimate density_I(const WeightAction& A, const StratumLabel& L, const PointM& x, int k,
                          const FiberOptions& o = {}) {
    if (L.isotropy.is_full) return {1.0, 0.0};
    auto ctx = stratum_context(A, L, x);
    auto F = fiber_integral(ctx, k, Twist::plain, o);
    double s = orbit_volume(A, x, L.isotropy).value * prefactor(k, L.dim_m());
    return {s * F.value, s * F.error};
}

/// 2^{m/2} (k/2pi)^{m/2} int_m tau e^{-k f - g}; 1 when H = G.
inline Estimate density_J(const WeightAction& A, const StratumLabel& L, const PointM& x, int k,
                          const FiberOptions& o = {}) {
    if (L.isotropy.is_full) return {1.0, 0.0};
    auto ctx = stratum_context(A, L, x);
    auto F = fiber_integral(ctx, k, Twist::halfform, o);
    double s = std::pow(2.0, 0.5 * L.dim_m()) * prefactor(k, L.dim_m());
    return {s * F.value, s * F.error};
}

/// Largest R (coefficient norm in m) with |f - q| <= 25% q on the ball, q the quadratic model.
inline double select_R(const WeightAction& A, const StratumLabel& L, const PointM& x, double rel = 0.25) {
    if (L.isotropy.is_full) return 0.0;
    auto ctx = stratum_context(A, L, x);
    const Eigen::Index m = ctx.Xi.cols();
    std::vector<Vec> dirs;
    if (m == 1) {
        dirs = {Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)};
    } else {
        for (int i = 0; i < 32; ++i) {
            Vec d(2);
            d << std::cos(kTwoPi * i / 32), std::sin(kTwoPi * i / 32);
            dirs.push_back(d);
        }
    }
    auto ok = [&](double r) {
        for (const auto& d : dirs) {
            double q = r * r * d.dot(ctx.gram0 * d);
            double f = flow_potential_closed(A, ctx.Xi * (r * d), x);
            if (std::abs(f - q) > rel * q) return false;
        }
        return true;
    };
    double lo = 0.0, hi = 1e-3;
    while (ok(hi) && hi < 1e3) {
        lo = hi;
        hi *= 2;
    }
    for (int it = 0; it < 50; ++it) {
        double mid = 0.5 * (lo + hi);
        (ok(mid) ? lo : hi) = mid;
    }
    // the whole ray profile must stay inside the band, not only the sphere
    for (double r = lo; r > 0; r *= 0.999)
        if ([&] {
                for (int s = 1; s <= 40; ++s)
                    if (!ok(r * s / 40.0)) return false;
                return true;
            }())
            return r;
    return lo;
}

struct TruncatedDensity {
    Estimate I, J;
    double R = 0.0;
};

/// (k/2pi)^{m/2} int_{B_R} tau e^{-k f} (limit 2^{-m/2}) and the half-form analogue with 2^{m/2}.
inline TruncatedDensity truncated_density(const WeightAction& A, const StratumLabel& L, const PointM& x, int k,
                                          double R, FiberOptions o = {}) {
    if (!(R > 0)) throw ConfigError("truncation radius must be positive");
    TruncatedDensity t;
    t.R = R;
    if (L.isotropy.is_full) {
        t.I = t.J = {1.0, 0.0};
        return t;
    }
    auto ctx = stratum_context(A, L, x);
    o.radius = R;
    const double pre = prefactor(k, L.dim_m());
    auto a = fiber_integral(ctx, k, Twist::plain, o);
    auto b = fiber_integral(ctx, k, Twist::halfform, o);
    const double h = std::pow(2.0, 0.5 * L.dim_m());
    t.I = {pre * a.value, pre * a.error};
    t.J = {h * pre * b.value, h * pre * b.error};
    return t;
}

/// min over unit directions and t in [t0, t1] of f(t xi_hat, x)/t (coefficient units).
inline double growth_constant(const WeightAction& A, const Mat& Xi, const PointM& x, double t0, double t1 = 40.0,
                               int radial = 200, int angular = 64) {
    const Eigen::Index m = Xi.cols();
    std::vector<Vec> dirs;
    if (m == 1) {
        dirs = {Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)};
    } else {
        for (int i = 0; i < angular; ++i) {
            Vec d(m);
            d.setZero();
            d[0] = std::cos(kTwoPi * i / angular);
            d[1] = std::sin(kTwoPi * i / angular);
            dirs.push_back(d);
        }
    }
    double C = std::numeric_limits<double>::infinity();
    for (const auto& d : dirs)
        for (int s = 0; s <= radial; ++s) {
            double t = t0 + (t1 - t0) * s / radial;
            C = std::min(C, flow_potential_closed(A, Xi * (t * d), x) / t);
        }
    return C;
}

struct TailCertificate {
    double R = 0.0, D = 0.0, b = 0.0;
    int k_min = 0;
    double C = 0.0;
    double tau_bound = 0.0;
    std::vector<CurvePoint> direct;  // direct tail (k, value, bound)
    std::vector<double> bound;
    bool valid = true;
};

/// Tail (k/2pi)^{m/2} int_{|c|>R} tau e^{-k f} <= b e^{-R D k} for k >= k_min.
/// With f >= C |c| beyond R and tau <= tau_bound the tail is at most
/// (k/2pi)^{m/2} tau_bound area(S^{m-1}) int_R^inf r^{m-1} e^{-k C r} dr; D = C/2 leaves room
/// for the polynomial prefactor, absorbed into b.
inline TailCertificate tail_certificate(const WeightAction& A, const StratumLabel& L, const PointM& x, double R,
                                        const std::vector<int>& k_grid) {
    if (!(R > 0)) throw ConfigError("truncation radius must be positive");
    if (k_grid.empty()) throw ConfigError("k grid is empty");
    TailCertificate tc;
    tc.R = R;
    auto ctx = stratum_context(A, L, x);
    const int m = int(ctx.Xi.cols());
    tc.C = growth_constant(A, ctx.Xi, x, R);
    if (!(tc.C > 0)) throw NumericalError("growth constant is not positive; point is off the claimed stratum");
    // tau is bounded along rays (the flow contracts); take the sampled maximum with a margin
    double tmax = 0.0;
    for (int s = 0; s <= 400; ++s) {
        double r = R + 40.0 * s / 400;
        for (double sg : {1.0, -1.0}) {
            Vec c = Vec::Zero(m);
            c[0] = sg * r;
            tmax = std::max(tmax, jacobian_tau(A, ctx.Xi * c, x, ctx.Xi, ctx.slice));
            if (m == 2) {
                Vec c2 = Vec::Zero(m);
                c2[1] = sg * r;
                tmax = std::max(tmax, jacobian_tau(A, ctx.Xi * c2, x, ctx.Xi, ctx.slice));
            }
        }
    }
    tc.tau_bound = 1.5 * tmax;
    tc.D = tc.C / 2;
    tc.k_min = *std::min_element(k_grid.begin(), k_grid.end());
    auto bound = [&](double k) {
        double a = k * tc.C;
        double radial = m == 1 ? 2.0 * std::exp(-a * R) / a : kTwoPi * std::exp(-a * R) * (R / a + 1.0 / (a * a));
        return std::pow(k / kTwoPi, m / 2.0) * tc.tau_bound * radial;
    };
    tc.b = 0.0;
    for (int k = tc.k_min; k <= 4000; ++k) tc.b = std::max(tc.b, bound(k) * std::exp(R * tc.D * k));
    for (int k : k_grid) {
        // direct tail: full minus truncated fibre integral
        FiberOptions full, inner;
        inner.radius = R;
        double pre = prefactor(k, m);
        double tail = pre * (fiber_integral(ctx, k, Twist::plain, full).value -
                             fiber_integral(ctx, k, Twist::plain, inner).value);
        double bd = tc.b * std::exp(-R * tc.D * k);
        tc.direct.push_back({k, tail, 0.0});
        tc.bound.push_back(bd);
        if (tail > bd) tc.valid = false;
    }
    return tc;
}

// ---------------------------------------------------------------------------------------------

/// Residual term for a stratum: sum over the extra pieces of F_infinity^{-1}(Z) of the piece
/// integrals (trace over the invariant basis). Pieces are disjoint faces, so the
/// inclusion-exclusion has no correction terms.
inline Estimate residual_II(const WeightAction& A, const StratumLabel& L, int k, Twist tw,
                            const GramOptions& o = {}) {
    auto dec = decompose_preimage(A, L);
    if (dec.pieces.empty()) return {0.0, 0.0};
    auto basis = invariant_basis(A, k, tw);
    if (basis.empty()) return {0.0, 0.0};
    double v = 0.0, e2 = 0.0;
    for (const auto& P : dec.pieces) {
        auto pc = piece_upstairs(A, P, k, tw, basis, o);
        v += pc.diag.sum();
        e2 += pc.error.squaredNorm();
    }
    return {v, std::sqrt(e2)};
}

// ---------------------------------------------------------------------------------------------

struct DefectResult {
    double value = 0.0;
    double error = 0.0;
    Vec eigenvalues;
    Vec eigen_errors;
    int norm_up = 1, norm_down = 1;
};

/// max |lambda - 1| over generalized eigenvalues of (G_down, G_up) with first-order error bars.
inline DefectResult gram_defect(const CMat& Gdown, const Mat& Edown, const CMat& Gup, const Mat& Eup) {
    const Eigen::Index n = Gup.rows();
    Eigen::LLT<CMat> llt(Gup);
    if (llt.info() != Eigen::Success) throw NumericalError("upstairs Gram is not positive definite");
    CMat Li = llt.matrixL().solve(CMat::Identity(n, n));
    CMat S = Li * Gdown * Li.adjoint();
    S = 0.5 * (S + S.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMat> es(S);
    DefectResult r;
    r.eigenvalues = es.eigenvalues();
    if (r.eigenvalues.minCoeff() < -1e-10 * std::max(1.0, r.eigenvalues.maxCoeff()))
        throw NumericalError("downstairs Gram is not positive semidefinite");
    CMat V = Li.adjoint() * es.eigenvectors();  // G_up-orthonormal eigenvectors
    r.eigen_errors.resize(n);
    for (Eigen::Index c = 0; c < n; ++c) {
        double lam = r.eigenvalues[c], s2 = 0.0;
        for (Eigen::Index a = 0; a < n; ++a)
            for (Eigen::Index b = 0; b < n; ++b) {
                double w = std::norm(V(a, c)) * std::norm(V(b, c));
                s2 += w * (Edown(a, b) * Edown(a, b) + lam * lam * Eup(a, b) * Eup(a, b));
            }
        r.eigen_errors[c] = std::sqrt(s2);
        double d = std::abs(lam - 1.0);
        if (c == 0 || d > r.value) {
            r.value = d;
            r.error = r.eigen_errors[c];
        }
    }
    return r;
}

inline DefectResult unitarity_defect(const WeightAction& A, int k, Twist tw, int norm_up, int norm_down,
                                     const GramOptions& o = {}) {
    auto up = gram_upstairs(A, k, tw, norm_up, o);
    auto down = reduced_gram(A, k, tw, norm_down, o.slice_order);
    auto r = gram_defect(down.matrix, down.error, up.matrix, up.error);
    r.norm_up = norm_up;
    r.norm_down = norm_down;
    return r;
}

// ---------------------------------------------------------------------------------------------

struct ConsistencyRow {
    int norm_def = 1;
    std::string stratum;
    Twist twist = Twist::plain;
    int k = 0;
    double lhs = 0.0, lhs_err = 0.0;   // direct integral over F_infinity^{-1}(Z), Monte Carlo
    double rhs = 0.0, rhs_err = 0.0;   // stratum integral with density, plus residual pieces
    double z = 0.0;                    // |lhs - rhs| / combined sigma
    double rel = 0.0;
    bool skipped = false;
    std::string note;
};

/// Stratum-by-stratum check of the norm decomposition, trace over the invariant basis.
inline std::vector<ConsistencyRow> norm_decomposition_check(const WeightAction& A, int k, Twist tw, long samples,
                                                    std::uint64_t seed, const GramOptions& o = {}) {
    std::vector<ConsistencyRow> rows;
    if (tw == Twist::halfform && !A.model.metaplectic_allowed) return rows;
    auto basis = invariant_basis(A, k, tw);
    Support open = open_stratum_support(A);
    auto strata = combinatorial_strata(A);
    for (std::size_t si = 0; si < strata.size(); ++si) {
        const auto& L = strata[si];
        ConsistencyRow row;
        row.stratum = support_string(A.model, L.support);
        row.twist = tw;
        row.k = k;
        if (basis.empty()) {
            row.skipped = true;
            row.note = "no invariant sections";
            for (int nd : {1, 2})
                if (nd == 2 || L.support == open) {
                    row.norm_def = nd;
                    rows.push_back(row);
                }
            continue;
        }
        // left side: uniform sampling of every face flowing into the stratum
        auto dec = decompose_preimage(A, L);
        std::vector<Support> faces{L.support};
        for (const auto& p : dec.pieces) faces.push_back(p.support);
        double lhs = 0.0, le2 = 0.0;
        for (std::size_t f = 0; f < faces.size(); ++f) {
            auto rng = make_rng(seed, 1000 * (si + 1) + f);
            auto [mu, er] = face_integral_mc(A.model, faces[f], k, basis, samples, rng);
            lhs += mu.diagonal().real().sum();
            le2 += er.diagonal().squaredNorm();
        }
        // right side: (k/2pi)^{d_S/2} int_S |s'|^2 I_k (or J_k with the half-form descent) + II
        auto q = stratum_quadrature(A, L, o.slice_order);
        double rhs = 0.0, chk = 0.0, re2 = 0.0;
        const double pre = prefactor(k, L.dim_S);
        for (std::size_t i = 0; i < q.rule.points.size(); ++i) {
            if (q.weights[i] == 0.0 && q.check[i] == 0.0) continue;
            const PointM& u = q.rule.points[i];
            double down = 0.0;
            for (const auto& s : basis) down += pointwise_descended_norm(A, s, u, 1e-7);
            if (down == 0.0) continue;
            Estimate d = tw == Twist::plain ? density_I(A, L, u, k, o.fiber) : density_J(A, L, u, k, o.fiber);
            rhs += pre * q.weights[i] * down * d.value;
            chk += pre * q.check[i] * down * d.value;
            re2 += std::pow(pre * q.weights[i] * down * d.error, 2);
        }
        re2 += std::pow(rhs - chk, 2);
        auto II = residual_II(A, L, k, tw, o);
        rhs += II.value;
        re2 += II.error * II.error;
        row.lhs = lhs;
        row.lhs_err = std::sqrt(le2);
        row.rhs = rhs;
        row.rhs_err = std::sqrt(re2);
        double sig = std::hypot(row.lhs_err, row.rhs_err);
        row.z = sig > 0 ? std::abs(lhs - rhs) / sig : (lhs == rhs ? 0.0 : std::numeric_limits<double>::infinity());
        row.rel = rhs != 0 ? std::abs(lhs - rhs) / std::abs(rhs) : std::abs(lhs);
        for (int nd : {1, 2})
            if (nd == 2 || L.support == open) {
                row.norm_def = nd;
                rows.push_back(row);
            }
    }
    return rows;
}

} // namespace gqlab
