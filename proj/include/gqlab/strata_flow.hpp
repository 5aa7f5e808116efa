#pragma once

#include "polytope.hpp"

#include <boost/numeric/odeint.hpp>

#include <map>
#include <optional>

namespace gqlab {

struct StratumLabel {
    Support support;  // coordinates that are nonzero on the stratum
    IsotropyDescriptor isotropy;
    int component_id = 0;
    int dim_S = 0;
    int dim_upstairs = 0;

    int dim_m() const { return dim_upstairs - dim_S; }
};

struct ExtraPiece {
    Support parent;  // support of the stratum the piece flows to
    Support support;
    IsotropyDescriptor isotropy_prime;
    std::vector<Vec> face_vertices;  // vertices of the face of the piece image containing 0
    Vec level;                       // a_i, a point of the open image of the piece
    int dim_piece = 0;
    std::vector<int> overlaps;       // indices of pieces whose G_C-saturations meet this one
};

struct PreimageDecomposition {
    StratumLabel main;
    std::vector<ExtraPiece> pieces;
};

enum class FlowStatus { semistable, unsemistable, inconclusive };

struct FlowResult {
    FlowStatus status = FlowStatus::inconclusive;
    std::optional<PointM> limit;
    long steps = 0;
    double residual = 0.0;        // |phi|^2 (normalized norm) at termination
    double polish_gap = 0.0;      // mass dropped when snapping to the limit face
    bool monotone = true;         // |phi|^2 decreased on every accepted step
    std::vector<double> history;  // |phi|^2 after each accepted step
};

/// |phi|^2 with the dual of the normalized inner product.
inline double phi_norm2(const WeightAction& A, const PointM& p) {
    return 4.0 * kPi * kPi * moment_map(A, p).squaredNorm();
}

inline Support stratum_support_for(const WeightAction& A, const Support& s) {
    return feasible_support(A, s, Vec::Zero(A.d));
}

/// Newton solve for exp(i zeta) y in the zero level, zeta in m of the support of y.
inline PointM newton_to_zero_level(const WeightAction& A, PointM y, int max_iter = 60) {
    auto iso = isotropy(A, y);
    if (iso.is_full) return y;
    Mat Q = complement_basis(iso, A.d);
    for (int it = 0; it < max_iter; ++it) {
        Vec r = Q.transpose() * moment_map(A, y);
        if (r.norm() < 1e-15) break;
        std::vector<CVec> JX;
        for (Eigen::Index a = 0; a < Q.cols(); ++a) JX.push_back(cplx(0, 1) * field_X(A, Vec(Q.col(a)), y));
        Mat H(Q.cols(), Q.cols());
        for (Eigen::Index a = 0; a < Q.cols(); ++a)
            for (Eigen::Index b = 0; b < Q.cols(); ++b) H(a, b) = metric_B(A.model, JX[a], JX[b]);
        Vec step = H.ldlt().solve(r);
        y = imaginary_flow(A, Vec(-Q * step), 1.0, y);
    }
    return y;
}

/// Integrates x' = -grad |phi|^2 = -2 JX^{phi^#}(x). Since the group is abelian the trajectory
/// is exp(i eta(t)) x0 with eta' = -8 pi^2 phi(exp(i eta) x0), integrated by adaptive
/// Dormand-Prince steps. On convergence the limit is snapped to its face and polished.
inline FlowResult kirwan_flow(const WeightAction& A, const PointM& x0, double tol = 1e-12, long max_steps = 200000) {
    if (!(tol > 0)) throw ConfigError("kirwan_flow: tol must be positive");
    using State = std::vector<double>;
    namespace ode = boost::numeric::odeint;
    const int d = A.d;
    auto at = [&](const State& eta) {
        Vec e(d);
        for (int a = 0; a < d; ++a) e[a] = eta[a];
        return imaginary_flow(A, e, 1.0, x0);
    };
    auto sys = [&](const State& eta, State& deta, double) {
        Vec phi = moment_map(A, at(eta));
        for (int a = 0; a < d; ++a) deta[a] = -8.0 * kPi * kPi * phi[a];
    };
    auto grad2 = [&](const PointM& p) {
        Vec phi = moment_map(A, p);
        CVec g = cplx(0, 2) * field_X(A, Vec(4.0 * kPi * kPi * phi), p);
        return metric_B(A.model, g, g);
    };
    FlowResult r;
    State eta(d, 0.0);
    double t = 0.0, dt = 1e-3;
    double n2 = phi_norm2(A, x0);
    r.residual = n2;
    auto stepper = ode::make_controlled(1e-10, 1e-10, ode::runge_kutta_dopri5<State>());
    PointM cur = x0;
    while (true) {
        if (n2 < tol) {
            r.status = FlowStatus::semistable;
            break;
        }
        if (grad2(cur) < tol * tol && n2 > 10 * tol) {
            r.status = FlowStatus::unsemistable;
            r.limit = cur;
            r.residual = n2;
            return r;
        }
        if (r.steps >= max_steps) {
            r.status = FlowStatus::inconclusive;
            r.residual = n2;
            return r;
        }
        State trial = eta;
        double tt = t, h = dt;
        auto res = stepper.try_step(sys, trial, tt, h);
        if (res == ode::fail) {
            dt = h;
            continue;
        }
        PointM next = at(trial);
        double n2n = phi_norm2(A, next);
        if (n2n > n2) {
            // reject steps that do not decrease |phi|^2; this only happens near round-off
            dt *= 0.5;
            if (dt < 1e-14) {
                r.status = FlowStatus::unsemistable;
                r.limit = cur;
                r.residual = n2;
                return r;
            }
            continue;
        }
        eta = trial;
        t = tt;
        dt = std::min(h, 1e6 * std::max(1.0, t));
        cur = next;
        n2 = n2n;
        ++r.steps;
        r.history.push_back(n2);
    }
    r.residual = n2;
    if (r.steps == 0) {
        r.limit = x0;
        return r;
    }
    // snap onto the limit face predicted by the support of x0 and polish within it
    Support face = stratum_support_for(A, support_of(x0));
    if (face.empty()) throw NumericalError("kirwan_flow: converged on a point with unsemistable support");
    CVec z = cur.z;
    double gap = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i)
        if (!face[i]) {
            gap = std::max(gap, std::abs(z[i]));
            z[i] = 0.0;
        }
    r.polish_gap = gap;
    r.limit = newton_to_zero_level(A, make_point(A.model, z));
    return r;
}

enum class Semistability { stable, semistable_strict, unsemistable, inconclusive };

inline const char* to_string(Semistability s) {
    switch (s) {
        case Semistability::stable: return "stable";
        case Semistability::semistable_strict: return "semistable_strict";
        case Semistability::unsemistable: return "unsemistable";
        default: return "inconclusive";
    }
}

inline Semistability is_semistable(const WeightAction& A, const PointM& p, double tol = 1e-12) {
    auto r = kirwan_flow(A, p, tol);
    if (r.status == FlowStatus::unsemistable) return Semistability::unsemistable;
    if (r.status == FlowStatus::inconclusive) return Semistability::inconclusive;
    auto iso = isotropy(A, *r.limit);
    return iso.dim() == 0 ? Semistability::stable : Semistability::semistable_strict;
}

// ---------------------------------------------------------------------------------------------

inline StratumLabel make_label(const WeightAction& A, const Support& s, int component) {
    StratumLabel L;
    L.support = s;
    L.isotropy = isotropy_of_support(A, s);
    L.component_id = component;
    L.dim_upstairs = support_dim(A.model, s);
    L.dim_S = L.dim_upstairs - (A.d - L.isotropy.dim());
    return L;
}

/// Strata of the zero level, one per support pattern that is its own limit face; patterns
/// sharing an isotropy type are told apart by component_id.
inline std::vector<StratumLabel> combinatorial_strata(const WeightAction& A) {
    std::vector<StratumLabel> out;
    std::vector<IsotropyDescriptor> seen;
    std::vector<int> counts;
    for (const auto& s : all_supports(A.model)) {
        Support fs = stratum_support_for(A, s);
        if (fs.empty() || fs != s) continue;
        auto iso = isotropy_of_support(A, s);
        int comp = 0;
        std::size_t k = 0;
        for (; k < seen.size(); ++k)
            if (seen[k] == iso) break;
        if (k == seen.size()) {
            seen.push_back(iso);
            counts.push_back(0);
        }
        comp = counts[k]++;
        out.push_back(make_label(A, s, comp));
    }
    // open stratum first, then by decreasing dimension
    std::stable_sort(out.begin(), out.end(), [](const StratumLabel& a, const StratumLabel& b) {
        return a.dim_upstairs > b.dim_upstairs;
    });
    return out;
}

struct SamplerConfig {
    int samples_per_face = 8;
    std::uint64_t seed = 1;
    double tol = 1e-12;
};

struct StrataReport {
    std::vector<StratumLabel> strata;
    std::vector<int> sample_counts;  // flow limits landing in each stratum
    int unsemistable_samples = 0;
};

/// Enumerates strata. Random points on every face M_tau are flowed to the zero level; their
/// limits must land in the combinatorially predicted strata.
inline StrataReport enumerate_strata(const WeightAction& A, const SamplerConfig& cfg = {}) {
    StrataReport rep;
    rep.strata = combinatorial_strata(A);
    if (rep.strata.empty()) throw ConfigError("zero level set is empty: 0 is not in the moment image");
    rep.sample_counts.assign(rep.strata.size(), 0);
    auto rng = make_rng(cfg.seed, 0x5a);
    std::normal_distribution<double> g;
    for (const auto& s : all_supports(A.model)) {
        Support predicted = stratum_support_for(A, s);
        for (int n = 0; n < cfg.samples_per_face; ++n) {
            CVec z = CVec::Zero(A.model.num_coords());
            for (int i = 0; i < A.model.num_coords(); ++i)
                if (s[i]) z[i] = cplx(g(rng), g(rng));
            PointM p = make_point(A.model, z);
            auto fr = kirwan_flow(A, p, cfg.tol);
            if (fr.status == FlowStatus::unsemistable) {
                if (!predicted.empty()) throw NumericalError("stratification mismatch: semistable face flowed away");
                ++rep.unsemistable_samples;
                continue;
            }
            if (fr.status != FlowStatus::semistable) continue;
            Support ls = support_of(*fr.limit, 1e-8);
            if (ls != predicted) throw NumericalError("stratification mismatch at face " + support_string(A.model, s));
            for (std::size_t k = 0; k < rep.strata.size(); ++k)
                if (rep.strata[k].support == ls) ++rep.sample_counts[k];
        }
    }
    return rep;
}

/// Level a_i for a piece: half the farthest vertex of the piece image, or half the vertex
/// centroid if that point is not in the open image.
inline Vec piece_level(const WeightAction& A, const Support& tau) {
    auto verts = face_vertices(A, tau);
    Vec far = verts.front();
    for (const auto& v : verts)
        if (v.norm() > far.norm()) far = v;
    Vec a = 0.5 * far;
    if (feasible_support(A, tau, a) == tau) return a;
    Vec cen = Vec::Zero(A.d);
    for (const auto& v : verts) cen += v;
    cen /= double(verts.size());
    a = 0.5 * cen;
    if (feasible_support(A, tau, a) == tau) return a;
    throw NumericalError("could not place a level inside the piece image");
}

/// F_infinity^{-1}(Z) = G_C Z plus the faces O_tau that flow to Z without meeting it. Distinct
/// faces are disjoint, so no overlap corrections arise.
inline PreimageDecomposition decompose_preimage(const WeightAction& A, const StratumLabel& label) {
    PreimageDecomposition out;
    out.main = label;
    for (const auto& tau : all_supports(A.model)) {
        if (tau == label.support) continue;
        if (stratum_support_for(A, tau) != label.support) continue;
        ExtraPiece p;
        p.parent = label.support;
        p.support = tau;
        p.isotropy_prime = isotropy_of_support(A, tau);
        p.dim_piece = support_dim(A.model, tau);
        for (const auto& v : face_vertices(A, label.support)) p.face_vertices.push_back(v);
        p.level = piece_level(A, tau);
        if (p.isotropy_prime.dim() >= label.isotropy.dim())
            throw NumericalError("piece isotropy not smaller than stratum isotropy");
        out.pieces.push_back(p);
    }
    return out;
}

// ---------------------------------------------------------------------------------------------

/// Quadrature on a stratum: representatives u with weights w such that
/// sum w f(u) ~ int_S f eps_S for torus-invariant f.
struct StratumQuadrature {
    LevelRule rule;
    std::vector<double> weights;  // main rule, eps_S
    std::vector<double> check;
    std::vector<double> orbit_volumes;
    Mat Xi;  // orthonormal frame of m in algebra units
};

inline StratumQuadrature stratum_quadrature(const WeightAction& A, const StratumLabel& L, int order = 61) {
    StratumQuadrature q;
    Mat Qm = complement_basis(L.isotropy, A.d);
    q.Xi = algebra_frame(Qm);
    q.rule = level_rule(A, L.support, Qm, Vec::Zero(A.d), order);
    for (std::size_t i = 0; i < q.rule.points.size(); ++i) {
        auto ov = orbit_volume(A, q.rule.points[i], L.isotropy);
        q.orbit_volumes.push_back(ov.value);
        // dvol_Z = w J, eps_S = dvol_Z / vol(G u) = w J / vol
        double f = ov.is_full ? 1.0 : ov.gram / ov.value;
        if (q.rule.slice_dim == 0 && q.rule.coords.free.empty()) f = 1.0;
        q.weights.push_back(q.rule.weights[i] * f);
        q.check.push_back(q.rule.check[i] * f);
    }
    return q;
}

struct StratumSample {
    std::vector<PointM> points;
    std::vector<double> weights;
};

/// Points on Z with weights estimating int_S f eps_S (f G-invariant, not necessarily torus
/// invariant): each quadrature node is spread over `count` random torus phases.
inline StratumSample sample_stratum(const WeightAction& A, const StratumLabel& L, int count, std::uint64_t seed) {
    if (count <= 0) throw ConfigError("sample count must be positive");
    auto q = stratum_quadrature(A, L);
    auto rng = make_rng(seed, 0x77);
    std::uniform_real_distribution<double> U(0.0, kTwoPi);
    StratumSample out;
    const Model& m = A.model;
    for (std::size_t i = 0; i < q.rule.points.size(); ++i) {
        if (q.weights[i] == 0.0) continue;
        for (int c = 0; c < count; ++c) {
            CVec z = q.rule.points[i].z;
            for (int f : q.rule.coords.free) z[f] *= std::polar(1.0, U(rng));
            out.points.push_back(make_point(m, z));
            out.weights.push_back(q.weights[i] / count);
        }
    }
    return out;
}

} // namespace gqlab
