#pragma once

// Combinatorics of products of simplices: support patterns, moment images of faces and
// level sets of the moment map written in action coordinates u_i = l_j |z_i|^2 / |z^(j)|^2.

#include "torus_actions.hpp"

#include <algorithm>

namespace gqlab {

using Support = std::vector<bool>;

inline std::string support_string(const Model& m, const Support& s) {
    std::string out;
    for (int j = 0; j < m.num_factors(); ++j) {
        if (j) out += '|';
        for (int i = 0; i < m.block_size(j); ++i) out += s[m.offset(j) + i] ? '1' : '0';
    }
    return out;
}

inline int support_count(const Support& s) { return int(std::count(s.begin(), s.end(), true)); }

/// Complex dimension of M_support.
inline int support_dim(const Model& m, const Support& s) { return support_count(s) - m.num_factors(); }

inline bool support_valid(const Model& m, const Support& s) {
    for (int j = 0; j < m.num_factors(); ++j) {
        bool any = false;
        for (int i = 0; i < m.block_size(j); ++i) any = any || s[m.offset(j) + i];
        if (!any) return false;
    }
    return true;
}

inline bool support_subset(const Support& a, const Support& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] && !b[i]) return false;
    return true;
}

/// Every valid support pattern, ordered by bitmask.
inline std::vector<Support> all_supports(const Model& m) {
    const int N = m.num_coords();
    std::vector<Support> out;
    for (unsigned long mask = 1; mask < (1ul << N); ++mask) {
        Support s(N);
        for (int i = 0; i < N; ++i) s[i] = (mask >> i) & 1ul;
        if (support_valid(m, s)) out.push_back(s);
    }
    return out;
}

/// Union of supports of the points lambda of the face Delta_support (a product of
/// simplices, one barycentric block per factor) whose moment image is `target`.
/// Empty when the target is not attained.
inline Support feasible_support(const WeightAction& A, const Support& sup, const Vec& target, double tol = 1e-9) {
    const Model& m = A.model;
    std::vector<int> cols;
    for (int i = 0; i < m.num_coords(); ++i)
        if (sup[i]) cols.push_back(i);
    const int nb = m.num_factors(), d = A.d, nv = int(cols.size());
    Mat E(nb + d, nv);
    Vec rhs(nb + d);
    E.setZero();
    for (int c = 0; c < nv; ++c) {
        int j = m.block_of(cols[c]);
        E(j, c) = 1.0;
        E.block(nb, c, d, 1) = -double(m.bundle_degrees[j]) * A.weight(cols[c]);
    }
    rhs.head(nb).setOnes();
    rhs.tail(d) = target + A.c();
    Support out(m.num_coords(), false);
    Eigen::FullPivLU<Mat> lu(E);
    const int rank = int(lu.rank());
    // enumerate column subsets of size rank (basic solutions)
    std::vector<int> pick(rank);
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == rank) {
            Mat Eb(nb + d, rank);
            for (int r = 0; r < rank; ++r) Eb.col(r) = E.col(pick[r]);
            Eigen::ColPivHouseholderQR<Mat> qr(Eb);
            if (qr.rank() < rank) return;
            Vec x = qr.solve(rhs);
            if ((Eb * x - rhs).cwiseAbs().maxCoeff() > tol) return;
            if (x.minCoeff() < -tol) return;
            for (int r = 0; r < rank; ++r)
                if (x[r] > tol) out[cols[pick[r]]] = true;
            return;
        }
        for (int c = start; c <= nv - (rank - depth); ++c) {
            pick[depth] = c;
            rec(c + 1, depth + 1);
        }
    };
    if (rank > 0) rec(0, 0);
    bool any = false;
    for (bool b : out) any = any || b;
    if (!any) return {};
    if (!support_valid(m, out)) return {};
    return out;
}

/// Moment images of the vertices of Delta_support.
inline std::vector<Vec> face_vertices(const WeightAction& A, const Support& sup) {
    const Model& m = A.model;
    std::vector<Vec> out{-A.c()};
    for (int j = 0; j < m.num_factors(); ++j) {
        std::vector<Vec> next;
        for (const Vec& v : out)
            for (int i = 0; i < m.block_size(j); ++i)
                if (sup[m.offset(j) + i]) next.push_back(v - double(m.bundle_degrees[j]) * A.weight(m.offset(j) + i));
        out = std::move(next);
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Action coordinates on M_support. In each factor the first supported coordinate is the
// reference; the others are free, u_i in [0, l_j] with block sums <= l_j. The symplectic
// volume is du dtheta and phi(u) = -Amat u + b0.

struct ActionCoords {
    Support support;
    std::vector<int> free;  // free coordinate indices
    std::vector<int> ref;   // reference coordinate per factor
    Mat Amat;               // d x F
    Vec b0;                 // d
};

inline ActionCoords action_coords(const WeightAction& A, const Support& sup) {
    const Model& m = A.model;
    ActionCoords ac;
    ac.support = sup;
    ac.b0 = -A.c();
    for (int j = 0; j < m.num_factors(); ++j) {
        int r = -1;
        for (int i = 0; i < m.block_size(j); ++i) {
            int g = m.offset(j) + i;
            if (!sup[g]) continue;
            if (r < 0) r = g;
            else ac.free.push_back(g);
        }
        ac.ref.push_back(r);
        ac.b0 -= double(m.bundle_degrees[j]) * A.weight(r);
    }
    ac.Amat.resize(A.d, ac.free.size());
    for (std::size_t f = 0; f < ac.free.size(); ++f) {
        int g = ac.free[f];
        ac.Amat.col(f) = A.weight(g) - A.weight(ac.ref[m.block_of(g)]);
    }
    return ac;
}

/// Real representative with |z_i|^2 determined by the action coordinates.
inline PointM point_from_action(const WeightAction& A, const ActionCoords& ac, const Vec& u) {
    const Model& m = A.model;
    CVec z = CVec::Zero(m.num_coords());
    std::vector<double> rest(m.num_factors(), 1.0);
    for (std::size_t f = 0; f < ac.free.size(); ++f) {
        int g = ac.free[f], j = m.block_of(g);
        double l = m.bundle_degrees[j];
        double x = std::max(0.0, u[f] / l);
        z[g] = std::sqrt(x);
        rest[j] -= x;
    }
    for (int j = 0; j < m.num_factors(); ++j) z[ac.ref[j]] = std::sqrt(std::max(0.0, rest[j]));
    return make_point(m, z);
}

inline Vec action_of_point(const WeightAction& A, const ActionCoords& ac, const PointM& p) {
    const Model& m = A.model;
    Vec u(ac.free.size());
    for (std::size_t f = 0; f < ac.free.size(); ++f) {
        int g = ac.free[f], j = m.block_of(g);
        u[f] = m.bundle_degrees[j] * std::norm(p.z[g]) / p.z.segment(m.offset(j), m.block_size(j)).squaredNorm();
    }
    return u;
}

/// Quadrature for a level set {phi_m(u) = a_m} inside the open face. The weights already carry
/// the torus factor (2 pi)^F and the coarea factor 1/sqrt(det(A_m A_m^T)), so that
///   int_level g dvol_level = sum_i w_i g(u_i) J(u_i)
/// for torus-invariant g, where J is sqrt det B(JX^{xi_a}, JX^{xi_b}) over the m frame.
struct LevelRule {
    ActionCoords coords;
    Mat Qm;                        // Euclidean orthonormal basis of m
    std::vector<Vec> nodes;        // action coordinates
    std::vector<PointM> points;
    std::vector<double> weights;   // main rule
    std::vector<double> check;     // lower-order rule on the same nodes (zero where unused)
    int slice_dim = 0;
};

namespace detail {

struct SliceGeometry {
    Vec u0;
    Mat N;     // F x s orthonormal
    Mat G;     // inequality rows, G t <= h
    Vec h;
};

inline SliceGeometry slice_geometry(const WeightAction& A, const ActionCoords& ac, const Mat& Qm, const Vec& a) {
    const Model& m = A.model;
    const int F = int(ac.free.size());
    Mat C = Qm.transpose() * ac.Amat;  // m x F
    Vec r = Qm.transpose() * (ac.b0 - a);
    SliceGeometry g;
    if (C.rows() == 0) {
        g.u0 = Vec::Zero(F);
        g.N = Mat::Identity(F, F);
    } else {
        Eigen::CompleteOrthogonalDecomposition<Mat> cod(C);
        g.u0 = cod.solve(r);
        Eigen::JacobiSVD<Mat> svd(C, Eigen::ComputeFullV);
        int rank = 0;
        for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
            if (svd.singularValues()[i] > 1e-12) ++rank;
        g.N = svd.matrixV().rightCols(F - rank);
    }
    const int s = int(g.N.cols());
    std::vector<Vec> rows;
    std::vector<double> rhs;
    for (int f = 0; f < F; ++f) {
        rows.push_back(-g.N.row(f).transpose());
        rhs.push_back(g.u0[f]);
    }
    for (int j = 0; j < m.num_factors(); ++j) {
        Vec row = Vec::Zero(s);
        double base = 0.0;
        bool any = false;
        for (int f = 0; f < F; ++f)
            if (m.block_of(ac.free[f]) == j) {
                row += g.N.row(f).transpose();
                base += g.u0[f];
                any = true;
            }
        if (!any) continue;
        rows.push_back(row);
        rhs.push_back(m.bundle_degrees[j] - base);
    }
    g.G.resize(rows.size(), s);
    g.h.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        g.G.row(i) = rows[i].transpose();
        g.h[i] = rhs[i];
    }
    return g;
}

/// Vertices of {t : G t <= h} in dimension s (s <= 2), unordered.
inline std::vector<Vec> polytope_vertices(const SliceGeometry& g, double tol = 1e-11) {
    const int s = int(g.G.cols());
    const int r = int(g.G.rows());
    std::vector<Vec> out;
    auto feasible = [&](const Vec& t) { return ((g.G * t - g.h).array() <= tol).all(); };
    auto push = [&](const Vec& t) {
        for (const auto& v : out)
            if ((v - t).norm() < 1e-9) return;
        out.push_back(t);
    };
    if (s == 0) {
        Vec t(0);
        if (feasible(t)) out.push_back(t);
        return out;
    }
    std::vector<int> pick(s);
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == s) {
            Mat M(s, s);
            Vec b(s);
            for (int i = 0; i < s; ++i) {
                M.row(i) = g.G.row(pick[i]);
                b[i] = g.h[pick[i]];
            }
            Eigen::FullPivLU<Mat> lu(M);
            if (lu.rank() < s) return;
            Vec t = lu.solve(b);
            if (feasible(t)) push(t);
            return;
        }
        for (int c = start; c < r; ++c) {
            pick[depth] = c;
            rec(c + 1, depth + 1);
        }
    };
    rec(0, 0);
    return out;
}

template <int Points>
struct KronrodTable {
    using GK = boost::math::quadrature::gauss_kronrod<double, Points>;
    // nodes in [0,1], Kronrod weights and embedded Gauss weights (0 at Kronrod-only nodes)
    std::vector<double> x, wk, wg;
    KronrodTable() {
        const auto& a = GK::abscissa();
        const auto& k = GK::weights();
        const auto& gw = boost::math::quadrature::gauss<double, (Points - 1) / 2>::weights();
        const bool odd = ((Points - 1) / 2) & 1;
        for (std::size_t i = 0; i < a.size(); ++i) {
            bool is_gauss = odd ? (i % 2 == 0) : (i % 2 == 1);
            double wgi = is_gauss ? gw[i / 2] : 0.0;
            x.push_back(0.5 * (1 + a[i]));
            wk.push_back(0.5 * k[i]);
            wg.push_back(0.5 * wgi);
            if (a[i] != 0.0) {
                x.push_back(0.5 * (1 - a[i]));
                wk.push_back(0.5 * k[i]);
                wg.push_back(0.5 * wgi);
            }
        }
    }
};

inline const KronrodTable<61>& kronrod61() {
    static const KronrodTable<61> t;
    return t;
}

inline const KronrodTable<31>& kronrod31() {
    static const KronrodTable<31> t;
    return t;
}

} // namespace detail

/// Level set {phi = a} restricted to m-components inside the open face of `sup`.
/// Throws if the level set is empty or has dimension > 2.
inline LevelRule level_rule(const WeightAction& A, const Support& sup, const Mat& Qm, const Vec& a, int order = 61) {
    LevelRule R;
    R.coords = action_coords(A, sup);
    R.Qm = Qm;
    const ActionCoords& ac = R.coords;
    auto g = detail::slice_geometry(A, ac, Qm, a);
    const int s = int(g.N.cols());
    R.slice_dim = s;
    Mat Am = -(kTwoPi * Qm).transpose() * ac.Amat;
    double coarea = Am.rows() ? std::sqrt((Am * Am.transpose()).determinant()) : 1.0;
    double torus = std::pow(kTwoPi, double(ac.free.size()));
    double scale = torus / coarea;
    auto verts = detail::polytope_vertices(g);
    if (verts.empty()) throw NumericalError("level set is empty for support " + support_string(A.model, sup));
    auto add = [&](const Vec& t, double w, double wc) {
        Vec u = g.u0 + g.N * t;
        R.nodes.push_back(u);
        R.points.push_back(point_from_action(A, ac, u));
        R.weights.push_back(scale * w);
        R.check.push_back(scale * wc);
    };
    if (s == 0) {
        add(Vec(0), 1.0, 1.0);
        return R;
    }
    const auto& K = order >= 61 ? detail::kronrod61().x : detail::kronrod31().x;
    const auto& WK = order >= 61 ? detail::kronrod61().wk : detail::kronrod31().wk;
    const auto& WG = order >= 61 ? detail::kronrod61().wg : detail::kronrod31().wg;
    if (s == 1) {
        if (verts.size() != 2) throw NumericalError("degenerate one-dimensional level set");
        double lo = std::min(verts[0][0], verts[1][0]), hi = std::max(verts[0][0], verts[1][0]);
        // t = lo + (hi - lo) sin^2(pi x / 2) clusters nodes at the ends, where orbits shrink
        for (std::size_t i = 0; i < K.size(); ++i) {
            double x = K[i];
            double sn = std::sin(kPi * x / 2);
            double jac = (hi - lo) * (kPi / 2) * std::sin(kPi * x);
            Vec t(1);
            t[0] = lo + (hi - lo) * sn * sn;
            add(t, WK[i] * jac, WG[i] * jac);
        }
        return R;
    }
    if (s == 2) {
        Vec cen = Vec::Zero(2);
        for (const auto& v : verts) cen += v;
        cen /= double(verts.size());
        std::sort(verts.begin(), verts.end(), [&](const Vec& p, const Vec& q) {
            return std::atan2(p[1] - cen[1], p[0] - cen[0]) < std::atan2(q[1] - cen[1], q[0] - cen[0]);
        });
        // fan of triangles from the centroid, collapsed tensor rule on each
        for (std::size_t e = 0; e < verts.size(); ++e) {
            const Vec& p1 = verts[e];
            const Vec& p2 = verts[(e + 1) % verts.size()];
            Vec d1 = p1 - cen, d2 = p2 - cen;
            double area2 = std::abs(d1[0] * d2[1] - d1[1] * d2[0]);
            for (std::size_t i = 0; i < K.size(); ++i)
                for (std::size_t k = 0; k < K.size(); ++k) {
                    double r = K[i], q = K[k];
                    Vec t = cen + r * ((1 - q) * d1 + q * d2);
                    double jac = area2 * r;
                    add(t, WK[i] * WK[k] * jac, WG[i] * WG[k] * jac);
                }
        }
        return R;
    }
    throw NumericalError("level sets of dimension > 2 are not supported");
}

} // namespace gqlab
