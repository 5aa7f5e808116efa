#pragma once

#include "hilbert_spaces.hpp"

namespace gqlab {

/// Invariant section together with its restriction to sampled zero-level representatives.
struct ReducedSection {
    SectionPoly upstairs;
    Twist twist = Twist::plain;
    std::vector<PointM> points;
    std::vector<int> stratum;     // index into combinatorial_strata
    std::vector<double> values;   // downstairs pointwise norm square at [x]
};

/// Factor between the downstairs half-form norm and the upstairs one at x0 in the zero level:
/// 2^{-m/2} vol(G x0), or 1 when the isotropy is all of G.
inline double descent_factor(const WeightAction& A, const PointM& x0) {
    auto iso = isotropy(A, x0);
    auto ov = orbit_volume(A, x0, iso);
    if (ov.is_full) return 1.0;
    return std::pow(2.0, -0.5 * (A.d - iso.dim())) * ov.value;
}

inline double pointwise_descended_norm(const WeightAction& A, const SectionPoly& r, const PointM& x0,
                                       double level_tol = 1e-8) {
    if (moment_map(A, x0).norm() > level_tol) throw ConfigError("point is not on the zero level");
    double v = pointwise_norm(A.model, r, x0);
    return r.twist == Twist::halfform ? descent_factor(A, x0) * v : v;
}

/// Kostant check at a few random points and directions; max normalized residual.
inline double invariance_residual(const WeightAction& A, const SectionPoly& s, int points = 4, std::uint64_t seed = 11) {
    auto rng = make_rng(seed, 0x1c);
    std::normal_distribution<double> g;
    double worst = 0.0;
    for (int i = 0; i < points; ++i) {
        PointM p = random_point(A.model, rng);
        Vec xi(A.d);
        for (int a = 0; a < A.d; ++a) xi[a] = g(rng);
        worst = std::max(worst, kostant_residual(A, s, xi, p));
    }
    return worst;
}

inline ReducedSection descend(const WeightAction& A, const SectionPoly& s, int per_node = 1, std::uint64_t seed = 1) {
    bool zero = true;
    for (const auto& [e, c] : s.coeffs) zero = zero && c == 0.0;
    if (!zero && invariance_residual(A, s) > 1e-6) throw ConfigError("descend: section is not invariant");
    ReducedSection r;
    r.upstairs = s;
    r.twist = s.twist;
    auto strata = combinatorial_strata(A);
    for (std::size_t i = 0; i < strata.size(); ++i) {
        auto smp = sample_stratum(A, strata[i], per_node, seed + i);
        for (const auto& p : smp.points) {
            r.points.push_back(p);
            r.stratum.push_back(int(i));
            r.values.push_back(zero ? 0.0 : pointwise_descended_norm(A, s, p));
        }
    }
    return r;
}

// ---------------------------------------------------------------------------------------------

struct ContractionReport {
    double contraction = 0.0;  // |i(Z) i(Zbar) eps| on the horizontal space, relative to omega^{d_S}/d_S!
    double predicted = 0.0;    // 2^{-m} vol(G x0)^2
    double factor_oracle = 0.0;
    double factor = 0.0;       // descent_factor
    double rel_dev = 0.0;
};

/// Contracts the Liouville form with Z^j = (X^j - i J X^j)/2 and their conjugates for an
/// orthonormal basis of m, then evaluates on an orthonormal J-basis of the horizontal space
/// (tangent to the zero level and B-orthogonal to the orbit). Computed as a complex
/// determinant in an oriented orthonormal frame of T_x M.
inline ContractionReport contraction_oracle(const WeightAction& A, const PointM& x0) {
    const Model& m = A.model;
    ContractionReport rep;
    auto iso = isotropy(A, x0);
    rep.factor = descent_factor(A, x0);
    if (iso.is_full) {
        rep.contraction = rep.predicted = 1.0;
        rep.factor_oracle = 1.0;
        return rep;
    }
    Mat Xi = algebra_frame(complement_basis(iso, A.d));
    auto T = tangent_basis(m, x0);  // pairs (e, ie), B-orthogonal
    const int n = int(T.size());
    std::vector<CVec> Tn;
    for (auto& t : T) Tn.push_back(t / std::sqrt(metric_B(m, t, t)));
    auto coords = [&](const CVec& v) {
        Vec c(n);
        for (int b = 0; b < n; ++b) c[b] = metric_B(m, v, Tn[b]);
        return c;
    };
    // horizontal space: orthogonal complement of span{X, JX} in T_x M
    const Eigen::Index mm = Xi.cols();
    Mat V(n, 2 * mm);
    for (Eigen::Index a = 0; a < mm; ++a) {
        CVec X = field_X(A, Xi.col(a), x0);
        V.col(a) = coords(X);
        V.col(mm + a) = coords(cplx(0, 1) * X);
    }
    Eigen::JacobiSVD<Mat> svd(V, Eigen::ComputeFullU);
    Mat H = svd.matrixU().rightCols(n - 2 * mm);
    // J acts on frame coordinates as the rotation (e, ie) -> (ie, -e)
    Mat Jc = Mat::Zero(n, n);
    for (int b = 0; b + 1 < n; b += 2) {
        Jc(b + 1, b) = 1.0;
        Jc(b, b + 1) = -1.0;
    }
    // J-adapted orthonormal basis of the horizontal space: e_1, J e_1, e_2, J e_2, ...
    Mat hb(n, n - 2 * mm);
    Mat rem = H;
    for (Eigen::Index c = 0; c < hb.cols(); c += 2) {
        Vec e = rem.col(0);
        for (Eigen::Index p = 0; p < c; ++p) e -= hb.col(p).dot(e) * hb.col(p);
        e.normalize();
        hb.col(c) = e;
        hb.col(c + 1) = Jc * e;
        // project the remainder off the new pair
        Mat P = Mat::Identity(n, n) - hb.leftCols(c + 2) * hb.leftCols(c + 2).transpose();
        Eigen::JacobiSVD<Mat> s2(P * H, Eigen::ComputeThinU);
        rem = s2.matrixU();
    }
    CMat M(n, n);
    for (Eigen::Index a = 0; a < mm; ++a) {
        Vec x = V.col(a), jx = V.col(mm + a);
        M.col(a) = 0.5 * (x.cast<cplx>() - cplx(0, 1) * jx.cast<cplx>());
        M.col(mm + a) = 0.5 * (x.cast<cplx>() + cplx(0, 1) * jx.cast<cplx>());
    }
    for (Eigen::Index c = 0; c < hb.cols(); ++c) M.col(2 * mm + c) = hb.col(c).cast<cplx>();
    rep.contraction = std::abs(M.determinant());
    auto ov = orbit_volume(A, x0, iso);
    rep.predicted = std::pow(2.0, -double(mm)) * ov.value * ov.value;
    // the raw determinant sees the orbit through the identity component only
    double cover = iso.finite_part * iso.identity_volume;
    rep.factor_oracle = std::sqrt(rep.contraction) / cover;
    rep.rel_dev = std::abs(rep.factor_oracle - rep.factor) / rep.factor;
    return rep;
}

// ---------------------------------------------------------------------------------------------

struct ReducedGram {
    std::vector<Exponent> basis_ids;
    CMat matrix;
    Mat error;
    int norm_def = 1;
    int k = 1;
    Twist twist = Twist::plain;
    std::vector<PieceContribution> breakdown;  // one per stratum
};

/// Downstairs inner products: sum over strata of (k/2pi)^{d_S/2} int_S (s', s') eps_S with
/// pointwise norms from the descent identities.
inline ReducedGram reduced_gram(const WeightAction& A, int k, Twist tw, int norm_def, int order = 61) {
    auto basis = invariant_basis(A, k, tw);
    if (basis.empty()) throw ConfigError("invariant basis is empty at k=" + std::to_string(k));
    ReducedGram R;
    R.basis_ids = exponents_of(basis);
    R.k = k;
    R.twist = tw;
    R.norm_def = norm_def;
    const int nb = int(basis.size());
    R.matrix = CMat::Zero(nb, nb);
    R.error = Mat::Zero(nb, nb);
    Vec err2 = Vec::Zero(nb);
    for (const auto& dec : norm_pieces(A, norm_def)) {
        const auto& L = dec.main;
        auto q = stratum_quadrature(A, L, order);
        PieceContribution pc;
        pc.kind = "stratum";
        pc.support = L.support;
        pc.dim = L.dim_S;
        pc.diag = Vec::Zero(nb);
        Vec chk = Vec::Zero(nb);
        const double pre = prefactor(k, L.dim_S);
        for (std::size_t i = 0; i < q.rule.points.size(); ++i) {
            if (q.weights[i] == 0.0 && q.check[i] == 0.0) continue;
            const PointM& u = q.rule.points[i];
            double fac = 1.0;
            if (tw == Twist::halfform && !L.isotropy.is_full)
                fac = std::pow(2.0, -0.5 * L.dim_m()) * q.orbit_volumes[i];
            for (int a = 0; a < nb; ++a) {
                double v = fac * pointwise_norm(A.model, basis[a], u);
                pc.diag[a] += pre * q.weights[i] * v;
                chk[a] += pre * q.check[i] * v;
            }
        }
        pc.error = (pc.diag - chk).cwiseAbs();
        for (int a = 0; a < nb; ++a) {
            R.matrix(a, a) += pc.diag[a];
            err2[a] += pc.error[a] * pc.error[a];
        }
        R.breakdown.push_back(pc);
    }
    for (int a = 0; a < nb; ++a) R.error(a, a) = std::sqrt(err2[a]);
    return R;
}

// ---------------------------------------------------------------------------------------------

struct MapMatrix {
    Mat matrix;
    int dim_up = 0;
    int dim_down = 0;
    int k0 = 1;                 // smallest k with nonincreasing norms along sampled rays
    double max_rate = 0.0;      // max over samples of d/dt log|r|^2 at the given k
};

/// Matrix of the descent map in matched monomial bases, plus the boundedness probe: along
/// rays exp(i t xi) x with x on the zero level and t >= 1,
/// d/dt log|r|^2 = -2 k phi_xi - (1/2) div(J X^xi) for the twist (no divergence term otherwise).
inline MapMatrix map_matrix(const WeightAction& A, int k, Twist tw, int rays = 24, std::uint64_t seed = 5) {
    auto basis = invariant_basis(A, k, tw);
    MapMatrix M;
    M.dim_up = int(basis.size());
    // downstairs sections are represented by their upstairs invariant data
    M.dim_down = M.dim_up;
    M.matrix = Mat::Identity(M.dim_up, M.dim_down);
    auto rng = make_rng(seed, 0x3d);
    std::normal_distribution<double> g;
    double need = 1.0;
    M.max_rate = -std::numeric_limits<double>::infinity();
    auto strata = combinatorial_strata(A);
    for (const auto& L : strata) {
        if (L.isotropy.is_full) continue;
        auto smp = sample_stratum(A, L, 1, seed);
        Mat Xi = algebra_frame(complement_basis(L.isotropy, A.d));
        for (int r = 0; r < rays; ++r) {
            const PointM& x = smp.points[std::size_t(r) % smp.points.size()];
            Vec c(Xi.cols());
            for (Eigen::Index a = 0; a < c.size(); ++a) c[a] = g(rng);
            Vec xi = Xi * c.normalized() / kTwoPi;
            for (double t : {1.0, 1.5, 2.5, 4.0}) {
                PointM y = imaginary_flow(A, xi, t, x);
                double ph = moment_map(A, y).dot(xi);
                double dv = tw == Twist::halfform ? divergence_JX(A, xi, y) : 0.0;
                M.max_rate = std::max(M.max_rate, -2.0 * k * ph - 0.5 * dv);
                if (ph > 0) need = std::max(need, std::ceil(-dv / (4.0 * ph)));
            }
        }
    }
    if (!std::isfinite(M.max_rate)) M.max_rate = 0.0;
    M.k0 = int(need);
    return M;
}

} // namespace gqlab
