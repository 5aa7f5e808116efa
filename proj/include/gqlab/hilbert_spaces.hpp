#pragma once

#include "fiber.hpp"
#include "strata_flow.hpp"

#include <map>

namespace gqlab {

using Exponent = std::vector<int>;

/// Multi-homogeneous polynomial; for the half-form twist it represents s mu with mu the
/// square root of the affine volume frame.
struct SectionPoly {
    int k = 1;
    Twist twist = Twist::plain;
    std::map<Exponent, cplx> coeffs;
};

/// Required degree per factor: k l_j, or k l_j - (n_j + 1)/2 for the twist.
inline std::vector<int> section_degrees(const Model& m, int k, Twist tw) {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (tw == Twist::halfform && !m.metaplectic_allowed)
        throw ConfigError("metaplectic parity: half-forms need every factor odd-dimensional");
    std::vector<int> deg;
    for (int j = 0; j < m.num_factors(); ++j)
        deg.push_back(k * m.bundle_degrees[j] - (tw == Twist::halfform ? (m.factors[j] + 1) / 2 : 0));
    return deg;
}

inline std::vector<SectionPoly> basis_sections(const Model& m, int k, Twist tw) {
    auto deg = section_degrees(m, k, tw);
    std::vector<Exponent> exps{Exponent()};
    for (int j = 0; j < m.num_factors(); ++j) {
        std::vector<Exponent> next;
        if (deg[j] < 0) return {};
        // compositions of deg[j] into block_size parts
        std::vector<Exponent> block;
        std::function<void(Exponent&, int, int)> rec = [&](Exponent& cur, int pos, int left) {
            if (pos == m.block_size(j) - 1) {
                cur.push_back(left);
                block.push_back(cur);
                cur.pop_back();
                return;
            }
            for (int a = left; a >= 0; --a) {
                cur.push_back(a);
                rec(cur, pos + 1, left - a);
                cur.pop_back();
            }
        };
        Exponent cur;
        rec(cur, 0, deg[j]);
        for (const auto& e : exps)
            for (const auto& b : block) {
                Exponent x = e;
                x.insert(x.end(), b.begin(), b.end());
                next.push_back(x);
            }
        exps = std::move(next);
    }
    std::vector<SectionPoly> out;
    for (const auto& e : exps) {
        SectionPoly s;
        s.k = k;
        s.twist = tw;
        s.coeffs[e] = 1.0;
        out.push_back(s);
    }
    return out;
}

inline cplx evaluate(const SectionPoly& s, const CVec& z) {
    cplx v = 0.0;
    for (const auto& [e, c] : s.coeffs) {
        cplx t = c;
        for (std::size_t i = 0; i < e.size(); ++i)
            if (e[i]) t *= std::pow(z[i], e[i]);
        v += t;
    }
    return v;
}

namespace detail {

/// Holomorphic divergence of X^{e_g} in the affine chart z_0 = 1 of factor j, by finite
/// differences of the chart expression of the flow.
inline cplx holomorphic_divergence(const WeightAction& A, int j, int g, const PointM& p, double h = 1e-5) {
    const Model& m = A.model;
    const int o = m.offset(j), s = m.block_size(j);
    Vec e = Vec::Zero(A.d);
    e[g] = 1.0;
    auto wdot = [&](const CVec& blk) {
        // d/dt of w_a = z_a / z_0 along exp(t e_g)
        CVec z = p.z;
        z.segment(o, s) = blk;
        PointM q{z};
        auto wat = [&](double t) {
            PointM r = torus_act(A, Vec(t * e), q);
            CVec w(s - 1);
            for (int a = 1; a < s; ++a) w[a - 1] = r.z[o + a] / r.z[o];
            return w;
        };
        return CVec((wat(h) - wat(-h)) / (2 * h));
    };
    CVec base = p.z.segment(o, s) / p.z[o];
    cplx div = 0.0;
    for (int a = 1; a < s; ++a) {
        CVec bx = base, by = base, cx = base, cy = base;
        bx[a] += h;
        cx[a] -= h;
        by[a] += cplx(0, h);
        cy[a] -= cplx(0, h);
        cplx dx = (wdot(bx)[a - 1] - wdot(cx)[a - 1]) / (2 * h);
        cplx dy = (wdot(by)[a - 1] - wdot(cy)[a - 1]) / (2 * h);
        div += 0.5 * (dx - cplx(0, 1) * dy);
    }
    return div;
}

} // namespace detail

/// Weight of the torus on the square root of the canonical bundle, from
/// 2 (L_X mu) mu = L_X(mu^2), expressed in the same units as monomial weights.
inline Vec halfform_weight(const WeightAction& A, std::uint64_t seed = 7) {
    const Model& m = A.model;
    auto rng = make_rng(seed, 0x4f);
    PointM p = random_point(m, rng);
    Vec w = Vec::Zero(A.d);
    for (int g = 0; g < A.d; ++g) {
        double s = 0.0;
        for (int j = 0; j < m.num_factors(); ++j) {
            cplx div = detail::holomorphic_divergence(A, j, g, p);
            // div(X) mu^2 in the chart; the chart frame carries weight (n+1) W_0 of O(-n-1)
            s += 0.5 * (div.imag() + (m.factors[j] + 1) * double(A.W(g, m.offset(j))));
        }
        double r = std::round(2 * s) / 2;
        if (std::abs(r - s) > 1e-6) throw NumericalError("half-form weight is not a half-integer");
        w[g] = r;
    }
    return w;
}

/// Invariant monomials: <W, alpha> (+ half-form weight) = -k c.
inline std::vector<SectionPoly> invariant_basis(const WeightAction& A, int k, Twist tw) {
    if (!A.lift_integral(k)) throw ConfigError("lift integrality: k c is not integral for k=" + std::to_string(k));
    Vec shift = Vec::Zero(A.d);
    if (tw == Twist::halfform) {
        if (!A.model.metaplectic_allowed) throw ConfigError("metaplectic parity: half-forms need odd factors");
        shift = halfform_weight(A);
    }
    Vec target = -double(k) * A.c();
    std::vector<SectionPoly> out;
    for (auto& s : basis_sections(A.model, k, tw)) {
        const Exponent& e = s.coeffs.begin()->first;
        Vec w = shift;
        for (std::size_t i = 0; i < e.size(); ++i) w += double(e[i]) * A.weight(int(i));
        if ((w - target).cwiseAbs().maxCoeff() < 1e-9) out.push_back(s);
    }
    return out;
}

/// Pointwise norm square. For the twist the (mu, mu) factor comes from
/// mu^2 ^ conj(mu^2) = (mu, mu)^2 eps_omega in the best affine chart.
inline double pointwise_norm(const Model& m, const SectionPoly& s, const PointM& p) {
    if (s.twist == Twist::plain) {
        double v = std::norm(evaluate(s, p.z));
        for (int j = 0; j < m.num_factors(); ++j)
            v /= std::pow(p.z.segment(m.offset(j), m.block_size(j)).squaredNorm(), s.k * m.bundle_degrees[j]);
        return v;
    }
    Chart c = best_chart(m, p);
    Vec x = to_chart(m, c, p);
    CVec zh = chart_lift(m, c, x);
    double v = std::norm(evaluate(s, zh));
    for (int j = 0; j < m.num_factors(); ++j)
        v /= std::pow(zh.segment(m.offset(j), m.block_size(j)).squaredNorm(), s.k * m.bundle_degrees[j]);
    // |dw ^ d(w bar)| = 2^n dx; (mu, mu) = sqrt(2^n / rho)
    double mu = std::sqrt(std::pow(2.0, m.dim()) / chart_density(m, c, x));
    return v * mu;
}

/// |Q_xi s| / (|s| (1 + k |xi|)) at p, with Q_xi = nabla_{X^xi} - i k phi_xi (+ L_{X^xi} on mu),
/// in the chart z_0 = 1 of every factor.
inline double kostant_residual(const WeightAction& A, const SectionPoly& s, const Vec& xi, const PointM& p,
                               double h = 1e-5) {
    const Model& m = A.model;
    Chart c;
    c.index.assign(m.num_factors(), 0);
    Vec x = to_chart(m, c, p);
    auto f = [&](const Vec& y) { return evaluate(s, chart_lift(m, c, y)); };
    auto flowed = [&](double t) { return to_chart(m, c, torus_act(A, Vec(t * xi), p)); };
    cplx fx = f(x);
    cplx dXf = (f(flowed(h)) - f(flowed(-h))) / (2 * h);
    Vec xdot = (flowed(h) - flowed(-h)) / (2 * h);
    auto loge = [&](const Vec& y) {
        CVec z = chart_lift(m, c, y);
        double v = 0.0;
        for (int j = 0; j < m.num_factors(); ++j)
            v -= double(s.k) * m.bundle_degrees[j] * std::log(z.segment(m.offset(j), m.block_size(j)).squaredNorm());
        return v;
    };
    cplx conn = 0.0;
    for (Eigen::Index a = 0; a + 1 < x.size(); a += 2) {
        Vec xp = x, xm = x, yp = x, ym = x;
        xp[a] += h;
        xm[a] -= h;
        yp[a + 1] += h;
        ym[a + 1] -= h;
        cplx dw = 0.5 * cplx((loge(xp) - loge(xm)) / (2 * h), -(loge(yp) - loge(ym)) / (2 * h));
        conn += dw * cplx(xdot[a], xdot[a + 1]);
    }
    cplx q = dXf + fx * conn - cplx(0, 1) * double(s.k) * moment_map(A, p).dot(xi) * fx;
    if (s.twist == Twist::halfform) {
        cplx div = 0.0;
        for (int j = 0; j < m.num_factors(); ++j)
            for (int g = 0; g < A.d; ++g) div += xi[g] * detail::holomorphic_divergence(A, j, g, p);
        q += 0.5 * div * fx;
    }
    double scale = std::abs(fx) * (1.0 + s.k * xi.norm());
    return scale > 0 ? std::abs(q) / scale : std::abs(q);
}

// ---------------------------------------------------------------------------------------------
// Gram matrices

struct PieceContribution {
    std::string kind;  // "stratum" or "piece"
    Support support;
    int dim = 0;       // complex dimension entering the prefactor
    Vec diag;          // contribution to each diagonal entry
    Vec error;
};

struct GramMatrix {
    std::vector<Exponent> basis_ids;
    CMat matrix;
    Mat error;
    int norm_def = 1;
    int k = 1;
    Twist twist = Twist::plain;
    std::vector<PieceContribution> breakdown;
    bool flagged = false;
};

struct GramOptions {
    int slice_order = 61;
    FiberOptions fiber;
    double flag_ratio = 0.2;
};

inline double prefactor(int k, int complex_dim) { return std::pow(double(k) / kTwoPi, complex_dim / 2.0); }

inline std::vector<Exponent> exponents_of(const std::vector<SectionPoly>& b) {
    std::vector<Exponent> out;
    for (const auto& s : b) out.push_back(s.coeffs.begin()->first);
    return out;
}

/// Support of the limit stratum of generic points (the open dense stratum).
inline Support open_stratum_support(const WeightAction& A) {
    Support full(A.model.num_coords(), true);
    Support s = stratum_support_for(A, full);
    if (s.empty()) throw ConfigError("zero level set is empty: 0 is not in the moment image");
    return s;
}

/// Strata (and their preimage decompositions) entering a norm definition.
inline std::vector<PreimageDecomposition> norm_pieces(const WeightAction& A, int norm_def) {
    if (norm_def != 1 && norm_def != 2) throw ConfigError("norm_def must be 1 or 2");
    std::vector<PreimageDecomposition> out;
    Support open = open_stratum_support(A);
    for (const auto& L : combinatorial_strata(A))
        if (norm_def == 2 || L.support == open) out.push_back(decompose_preimage(A, L));
    return out;
}

/// Upstairs contribution (k/2pi)^{n_(H)/2} int_{G_C Z} (s_a, s_a) via the coarea formula over
/// m x Z with Jacobian tau and norm transport along imaginary flows.
inline PieceContribution stratum_upstairs(const WeightAction& A, const StratumLabel& L, int k, Twist tw,
                                          const std::vector<SectionPoly>& basis, const GramOptions& o) {
    PieceContribution pc;
    pc.kind = "stratum";
    pc.support = L.support;
    pc.dim = L.dim_upstairs;
    const int nb = int(basis.size());
    pc.diag = Vec::Zero(nb);
    pc.error = Vec::Zero(nb);
    auto q = stratum_quadrature(A, L, o.slice_order);
    Vec chk = Vec::Zero(nb), ferr = Vec::Zero(nb);
    const double pre = prefactor(k, L.dim_S) * prefactor(k, L.dim_m());
    for (std::size_t i = 0; i < q.rule.points.size(); ++i) {
        if (q.weights[i] == 0.0 && q.check[i] == 0.0) continue;
        const PointM& u = q.rule.points[i];
        Vec vals(nb);
        for (int a = 0; a < nb; ++a) vals[a] = pointwise_norm(A.model, basis[a], u);
        if (vals.maxCoeff() == 0.0) continue;
        Estimate D{1.0, 0.0};
        if (!L.isotropy.is_full) {
            auto ctx = make_fiber_context(A, q.Xi, u, L.support);
            D = fiber_integral(ctx, k, tw, o.fiber);
            D.value *= q.orbit_volumes[i];
            D.error *= q.orbit_volumes[i];
        }
        pc.diag += pre * q.weights[i] * D.value * vals;
        chk += pre * q.check[i] * D.value * vals;
        ferr += pre * std::abs(q.weights[i]) * D.error * vals;
    }
    pc.error = (pc.diag - chk).cwiseAbs() + ferr;
    return pc;
}

/// Residual piece (k/2pi)^{n'/2} int_{O_tau} (s_a, s_a) via the level set S_i at a_i.
inline PieceContribution piece_upstairs(const WeightAction& A, const ExtraPiece& P, int k, Twist tw,
                                        const std::vector<SectionPoly>& basis, const GramOptions& o,
                                        const Vec* level_override = nullptr) {
    PieceContribution pc;
    pc.kind = "piece";
    pc.support = P.support;
    pc.dim = P.dim_piece;
    const int nb = int(basis.size());
    pc.diag = Vec::Zero(nb);
    Vec chk = Vec::Zero(nb), ferr = Vec::Zero(nb);
    Mat Qm = complement_basis(P.isotropy_prime, A.d);
    Mat Xi = algebra_frame(Qm);
    Vec level = level_override ? *level_override : P.level;
    auto R = level_rule(A, P.support, Qm, level, o.slice_order);
    const double pre = prefactor(k, P.dim_piece);
    for (std::size_t i = 0; i < R.points.size(); ++i) {
        if (R.weights[i] == 0.0 && R.check[i] == 0.0) continue;
        const PointM& u = R.points[i];
        Vec vals(nb);
        for (int a = 0; a < nb; ++a) vals[a] = pointwise_norm(A.model, basis[a], u);
        if (vals.maxCoeff() == 0.0) continue;
        auto ctx = make_fiber_context(A, Xi, u, P.support);
        Estimate D = fiber_integral(ctx, k, tw, o.fiber);
        double J = ctx.tau0;  // dvol(S_i) = w J
        pc.diag += pre * R.weights[i] * J * D.value * vals;
        chk += pre * R.check[i] * J * D.value * vals;
        ferr += pre * std::abs(R.weights[i]) * J * D.error * vals;
    }
    pc.error = (pc.diag - chk).cwiseAbs() + ferr;
    return pc;
}

inline GramMatrix assemble_gram(const std::vector<SectionPoly>& basis, int k, Twist tw, int norm_def,
                                std::vector<PieceContribution> parts, double flag_ratio) {
    GramMatrix G;
    G.basis_ids = exponents_of(basis);
    G.k = k;
    G.twist = tw;
    G.norm_def = norm_def;
    const int nb = int(basis.size());
    G.matrix = CMat::Zero(nb, nb);
    G.error = Mat::Zero(nb, nb);
    Vec err2 = Vec::Zero(nb);
    for (const auto& p : parts) {
        for (int a = 0; a < nb; ++a) {
            G.matrix(a, a) += p.diag[a];
            err2[a] += p.error[a] * p.error[a];
            if (p.diag[a] > 0 && p.error[a] > flag_ratio * p.diag[a]) G.flagged = true;
        }
    }
    for (int a = 0; a < nb; ++a) G.error(a, a) = std::sqrt(err2[a]);
    G.breakdown = std::move(parts);
    return G;
}

/// Upstairs Gram matrix. Distinct monomials are orthogonal on every piece because all
/// integrands other than the sections are invariant under the full diagonal torus, so the
/// matrix is diagonal in the monomial basis.
inline GramMatrix gram_upstairs(const WeightAction& A, int k, Twist tw, int norm_def, const GramOptions& o = {}) {
    auto basis = invariant_basis(A, k, tw);
    if (basis.empty()) throw ConfigError("invariant basis is empty at k=" + std::to_string(k));
    std::vector<PieceContribution> parts;
    for (const auto& dec : norm_pieces(A, norm_def)) {
        parts.push_back(stratum_upstairs(A, dec.main, k, tw, basis, o));
        for (const auto& P : dec.pieces) parts.push_back(piece_upstairs(A, P, k, tw, basis, o));
    }
    return assemble_gram(basis, k, tw, norm_def, std::move(parts), o.flag_ratio);
}

// ---------------------------------------------------------------------------------------------
// Direct Monte Carlo over the faces M_tau, used as an independent oracle.

inline double face_volume(const Model& m, const Support& s) {
    double v = 1.0;
    for (int j = 0; j < m.num_factors(); ++j) {
        int n = -1;
        for (int i = 0; i < m.block_size(j); ++i) n += s[m.offset(j) + i] ? 1 : 0;
        v *= std::pow(kTwoPi * m.bundle_degrees[j], n) / std::tgamma(n + 1.0);
    }
    return v;
}

/// Pointwise inner product (s_a, s_b) at a unit representative.
inline cplx pointwise_product(const Model& m, const SectionPoly& a, const SectionPoly& b, const PointM& p) {
    cplx v = evaluate(a, p.z) * std::conj(evaluate(b, p.z));
    if (a.twist == Twist::halfform)
        for (int j = 0; j < m.num_factors(); ++j) v *= std::pow(double(m.bundle_degrees[j]), -m.factors[j] / 2.0);
    return v;
}

/// (k/2pi)^{dim/2} int_{M_tau} (s_a, s_b) by uniform sampling of M_tau; entries with
/// standard errors (real and imaginary parts combined).
inline std::pair<CMat, Mat> face_integral_mc(const Model& m, const Support& tau, int k,
                                             const std::vector<SectionPoly>& basis, long samples,
                                             std::mt19937_64& rng) {
    const int nb = int(basis.size());
    const int dim = support_dim(m, tau);
    const double scale = prefactor(k, dim) * face_volume(m, tau);
    CMat mean = CMat::Zero(nb, nb);
    Mat err = Mat::Zero(nb, nb);
    if (dim == 0) {
        CVec z = CVec::Zero(m.num_coords());
        for (int i = 0; i < m.num_coords(); ++i)
            if (tau[i]) z[i] = 1.0;
        PointM p = make_point(m, z);
        for (int a = 0; a < nb; ++a)
            for (int b = 0; b < nb; ++b) mean(a, b) = pointwise_product(m, basis[a], basis[b], p);
        return {mean, err};
    }
    std::normal_distribution<double> g;
    // streaming first and second moments; the entries are bounded so plain sums are enough
    CMat sum = CMat::Zero(nb, nb);
    Mat sq = Mat::Zero(nb, nb);
    double hf = 1.0;
    if (!basis.empty() && basis[0].twist == Twist::halfform)
        for (int j = 0; j < m.num_factors(); ++j) hf *= std::pow(double(m.bundle_degrees[j]), -m.factors[j] / 2.0);
    CVec ev(nb);
    for (long s = 0; s < samples; ++s) {
        CVec z = CVec::Zero(m.num_coords());
        for (int i = 0; i < m.num_coords(); ++i)
            if (tau[i]) z[i] = cplx(g(rng), g(rng));
        PointM p = make_point(m, z);
        for (int a = 0; a < nb; ++a) ev[a] = evaluate(basis[a], p.z);
        for (int a = 0; a < nb; ++a)
            for (int b = 0; b < nb; ++b) {
                cplx v = hf * ev[a] * std::conj(ev[b]);
                sum(a, b) += v;
                sq(a, b) += std::norm(v);
            }
    }
    const double N = double(samples);
    for (int a = 0; a < nb; ++a)
        for (int b = 0; b < nb; ++b) {
            cplx mu = sum(a, b) / N;
            double var = std::max(0.0, sq(a, b) / N - std::norm(mu)) * N / std::max(1.0, N - 1);
            mean(a, b) = scale * mu;
            err(a, b) = scale * std::sqrt(var / N);
        }
    return {mean, err};
}

inline GramMatrix gram_upstairs_mc(const WeightAction& A, int k, Twist tw, int norm_def, long samples,
                                   std::uint64_t seed) {
    auto basis = invariant_basis(A, k, tw);
    if (basis.empty()) throw ConfigError("invariant basis is empty at k=" + std::to_string(k));
    GramMatrix G;
    G.basis_ids = exponents_of(basis);
    G.k = k;
    G.twist = tw;
    G.norm_def = norm_def;
    const int nb = int(basis.size());
    G.matrix = CMat::Zero(nb, nb);
    Mat err2 = Mat::Zero(nb, nb);
    std::uint64_t stream = 0;
    for (const auto& dec : norm_pieces(A, norm_def)) {
        std::vector<Support> faces{dec.main.support};
        for (const auto& p : dec.pieces) faces.push_back(p.support);
        for (const auto& f : faces) {
            auto rng = make_rng(seed, ++stream);
            auto [mu, er] = face_integral_mc(A.model, f, k, basis, samples, rng);
            G.matrix += mu;
            err2 += er.cwiseProduct(er);
            PieceContribution pc;
            pc.kind = f == dec.main.support ? "stratum" : "piece";
            pc.support = f;
            pc.dim = support_dim(A.model, f);
            pc.diag = mu.diagonal().real();
            pc.error = er.diagonal();
            G.breakdown.push_back(pc);
        }
    }
    G.error = err2.cwiseSqrt();
    return G;
}

} // namespace gqlab
