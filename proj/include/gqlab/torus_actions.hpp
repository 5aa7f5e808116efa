#pragma once

#include "kahler_models.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace gqlab {

/// Torus T^d = R^d / 2 pi Z^d acting by z_i -> exp(i <W_i, theta>) z_i, moment map shifted by c.
/// Lie algebra elements are written in angle units; the invariant inner product is
/// |xi|^2 / (4 pi^2), which gives the torus volume 1.
struct WeightAction {
    Model model;
    int d = 0;
    IMat W;  // d x num_coords
    std::vector<Rational> shift;

    Vec c() const {
        Vec v(d);
        for (int a = 0; a < d; ++a) v[a] = shift[a].value();
        return v;
    }
    Vec weight(int i) const { return W.col(i).cast<double>(); }

    /// k c must be integral for the lift to L^k to exist.
    bool lift_integral(int k) const {
        for (const auto& s : shift)
            if (!(s * k).is_integer()) return false;
        return true;
    }
};

inline WeightAction make_action(const Model& m, const IMat& W, std::vector<Rational> shift) {
    if (W.rows() < 1) throw ConfigError("weight matrix needs at least one row");
    if (W.cols() != m.num_coords())
        throw ConfigError("weight matrix has " + std::to_string(W.cols()) + " columns, expected " +
                          std::to_string(m.num_coords()));
    if (shift.size() != std::size_t(W.rows())) throw ConfigError("shift length must equal torus rank");
    return WeightAction{m, int(W.rows()), W, std::move(shift)};
}

/// Euclidean coordinates <-> orthonormal algebra elements.
inline Mat algebra_frame(const Mat& Q) { return kTwoPi * Q; }
inline double algebra_norm2(const Vec& xi) { return xi.squaredNorm() / (4.0 * kPi * kPi); }

inline Vec moment_map(const WeightAction& A, const PointM& p) {
    const Model& m = A.model;
    Vec phi = -A.c();
    for (int j = 0; j < m.num_factors(); ++j) {
        int o = m.offset(j);
        double n2 = p.z.segment(o, m.block_size(j)).squaredNorm();
        for (int i = 0; i < m.block_size(j); ++i)
            phi -= double(m.bundle_degrees[j]) * std::norm(p.z[o + i]) / n2 * A.weight(o + i);
    }
    return phi;
}

/// X^xi = d/dt exp(t xi) p.
inline CVec field_X(const WeightAction& A, const Vec& xi, const PointM& p) {
    CVec v(p.z.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = cplx(0, A.weight(int(i)).dot(xi)) * p.z[i];
    return horizontal(A.model, p, v);
}

inline std::pair<CVec, CVec> fundamental_fields(const WeightAction& A, const Vec& xi, const PointM& p) {
    CVec X = field_X(A, xi, p);
    return {X, cplx(0, 1) * X};
}

/// exp(theta) . p for theta in the torus.
inline PointM torus_act(const WeightAction& A, const Vec& theta, const PointM& p) {
    CVec z = p.z;
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] *= std::polar(1.0, A.weight(int(i)).dot(theta));
    return make_point(A.model, z);
}

/// exp(i t xi) . p, closed form.
namespace detail {
/// Factors exp(-t <W_i, xi>) rescaled per block by the largest one over the support of z,
/// which leaves the projective point unchanged and avoids overflow.
inline Vec flow_scales(const WeightAction& A, const Vec& xi, double t, const CVec& z) {
    const Model& m = A.model;
    Vec e(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) e[i] = -t * A.weight(int(i)).dot(xi);
    for (int j = 0; j < m.num_factors(); ++j) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int i = m.offset(j); i < m.offset(j) + m.block_size(j); ++i)
            if (z[i] != 0.0) mx = std::max(mx, e[i] + std::log(std::abs(z[i])));
        for (int i = m.offset(j); i < m.offset(j) + m.block_size(j); ++i)
            e[i] = z[i] != 0.0 ? std::exp(e[i] - mx) : 0.0;
    }
    return e;
}
} // namespace detail

inline PointM imaginary_flow(const WeightAction& A, const Vec& xi, double t, const PointM& p) {
    Vec s = detail::flow_scales(A, xi, t, p.z);
    CVec z = p.z;
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] *= s[i];
    return make_point(A.model, z);
}

/// Differential of exp(i xi) at p applied to v, as a horizontal vector at exp(i xi) p.
inline CVec flow_differential(const WeightAction& A, const Vec& xi, const PointM& p, const CVec& v) {
    const Model& m = A.model;
    CVec Dz(p.z.size()), Dv(p.z.size());
    Vec sc = detail::flow_scales(A, xi, 1.0, p.z);
    for (int j = 0; j < m.num_factors(); ++j) {
        // off-support directions get the unclamped factor relative to the same block scale
        double mx = -std::numeric_limits<double>::infinity();
        for (int i = m.offset(j); i < m.offset(j) + m.block_size(j); ++i)
            if (p.z[i] != 0.0) mx = std::max(mx, -A.weight(i).dot(xi) + std::log(std::abs(p.z[i])));
        for (int i = m.offset(j); i < m.offset(j) + m.block_size(j); ++i) {
            double s = p.z[i] != 0.0 ? sc[i] : std::exp(-A.weight(i).dot(xi) - mx);
            Dz[i] = sc[i] * p.z[i];
            Dv[i] = v[i] != 0.0 ? s * v[i] : 0.0;
        }
    }
    PointM y = make_point(m, Dz);
    CVec out(Dv.size());
    for (int j = 0; j < m.num_factors(); ++j) {
        int o = m.offset(j), s = m.block_size(j);
        double nrm = Dz.segment(o, s).norm();
        cplx ph = canonical_phase(Dz.segment(o, s));
        out.segment(o, s) = std::conj(ph) * Dv.segment(o, s) / nrm;
    }
    return horizontal(m, y, out);
}

// ---------------------------------------------------------------------------------------------
// Integer Smith normal form, used for stabilizers.

struct SmithForm {
    std::vector<long> diagonal;  // nonzero invariant factors
    IMat V;                      // unimodular column transform, D V = U^{-1} S
    int rank = 0;
};

inline SmithForm smith_form(IMat D) {
    const Eigen::Index r = D.rows(), c = D.cols();
    IMat V = IMat::Identity(c, c);
    SmithForm out;
    Eigen::Index t = 0;
    for (; t < std::min(r, c); ++t) {
        // pick the smallest nonzero pivot in the remaining block
        for (;;) {
            long best = 0;
            Eigen::Index bi = -1, bj = -1;
            for (Eigen::Index i = t; i < r; ++i)
                for (Eigen::Index j = t; j < c; ++j)
                    if (D(i, j) != 0 && (best == 0 || std::labs(D(i, j)) < best)) {
                        best = std::labs(D(i, j));
                        bi = i;
                        bj = j;
                    }
            if (bi < 0) goto done;
            D.row(t).swap(D.row(bi));
            D.col(t).swap(D.col(bj));
            V.col(t).swap(V.col(bj));
            bool clean = true;
            for (Eigen::Index i = t + 1; i < r; ++i) {
                long q = D(i, t) / D(t, t);
                D.row(i) -= q * D.row(t);
                if (D(i, t) != 0) clean = false;
            }
            for (Eigen::Index j = t + 1; j < c; ++j) {
                long q = D(t, j) / D(t, t);
                D.col(j) -= q * D.col(t);
                V.col(j) -= q * V.col(t);
                if (D(t, j) != 0) clean = false;
            }
            if (!clean) continue;
            // divisibility condition
            bool divides = true;
            for (Eigen::Index i = t + 1; i < r && divides; ++i)
                for (Eigen::Index j = t + 1; j < c; ++j)
                    if (D(i, j) % D(t, t) != 0) {
                        D.row(t) += D.row(i);
                        divides = false;
                        break;
                    }
            if (divides) break;
        }
        out.diagonal.push_back(std::labs(D(t, t)));
    }
done:
    out.rank = int(out.diagonal.size());
    out.V = V;
    return out;
}

/// Stabilizer data: Lie algebra h (integer basis of the kernel lattice), order of the
/// component group, and the volume of the identity component.
struct IsotropyDescriptor {
    Mat algebra_basis;  // d x dim h
    long finite_part = 1;
    bool is_full = false;
    double identity_volume = 1.0;

    int dim() const { return int(algebra_basis.cols()); }
    bool operator==(const IsotropyDescriptor& o) const {
        return finite_part == o.finite_part && is_full == o.is_full && dim() == o.dim() &&
               (dim() == 0 || (algebra_basis - o.algebra_basis).cwiseAbs().maxCoeff() < 1e-12);
    }
    /// Volume of the full stabilizer for the normalized metric.
    double volume() const { return double(finite_part) * identity_volume; }
};

inline IsotropyDescriptor isotropy_of_support(const WeightAction& A, const std::vector<bool>& support) {
    const Model& m = A.model;
    std::vector<Eigen::Matrix<long, 1, Eigen::Dynamic>> rows;
    for (int j = 0; j < m.num_factors(); ++j) {
        int o = m.offset(j), ref = -1;
        for (int i = 0; i < m.block_size(j); ++i) {
            if (!support[o + i]) continue;
            if (ref < 0) { ref = o + i; continue; }
            rows.push_back((A.W.col(o + i) - A.W.col(ref)).transpose());
        }
        if (ref < 0) throw ConfigError("support pattern empties a factor");
    }
    IsotropyDescriptor iso;
    const int d = A.d;
    if (rows.empty()) {
        iso.algebra_basis = Mat::Identity(d, d);
        iso.is_full = true;
        return iso;
    }
    IMat D(rows.size(), d);
    for (std::size_t r = 0; r < rows.size(); ++r) D.row(r) = rows[r];
    SmithForm s = smith_form(D);
    iso.finite_part = 1;
    for (long v : s.diagonal) iso.finite_part *= v;
    iso.algebra_basis = s.V.rightCols(d - s.rank).cast<double>();
    iso.is_full = s.rank == 0;
    if (iso.dim() > 0) {
        Mat K = iso.algebra_basis;
        iso.identity_volume = std::sqrt((K.transpose() * K).determinant());
    }
    return iso;
}

inline std::vector<bool> support_of(const PointM& p, double tol = 1e-10) {
    std::vector<bool> s(p.z.size());
    for (Eigen::Index i = 0; i < p.z.size(); ++i) s[i] = std::abs(p.z[i]) > tol;
    return s;
}

inline IsotropyDescriptor isotropy(const WeightAction& A, const PointM& p, double tol = 1e-10) {
    return isotropy_of_support(A, support_of(p, tol));
}

/// Euclidean orthonormal basis of the complement m of h.
inline Mat complement_basis(const IsotropyDescriptor& iso, int d) {
    if (iso.dim() == 0) return Mat::Identity(d, d);
    if (iso.dim() == d) return Mat(d, 0);
    Eigen::JacobiSVD<Mat> svd(iso.algebra_basis.transpose(), Eigen::ComputeFullV);
    return svd.matrixV().rightCols(d - iso.dim());
}

struct OrbitVolume {
    double value = 1.0;   // vol(G x) for the normalized torus
    double gram = 1.0;    // sqrt det B(X^{xi_a}, X^{xi_b}) over an orthonormal basis of m
    bool is_full = false;
};

inline Mat field_gram(const WeightAction& A, const Mat& Xi, const PointM& p) {
    const Eigen::Index m = Xi.cols();
    std::vector<CVec> X;
    for (Eigen::Index a = 0; a < m; ++a) X.push_back(field_X(A, Xi.col(a), p));
    Mat G(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = a; b < m; ++b) G(a, b) = G(b, a) = metric_B(A.model, X[a], X[b]);
    return G;
}

inline OrbitVolume orbit_volume(const WeightAction& A, const PointM& p, const IsotropyDescriptor& iso) {
    OrbitVolume v;
    if (iso.is_full) {
        v.is_full = true;
        return v;
    }
    Mat Xi = algebra_frame(complement_basis(iso, A.d));
    v.gram = std::sqrt(std::max(0.0, field_gram(A, Xi, p).determinant()));
    v.value = v.gram / iso.volume();
    return v;
}

inline OrbitVolume orbit_volume(const WeightAction& A, const PointM& p) {
    return orbit_volume(A, p, isotropy(A, p));
}

/// B-orthonormal basis of T_u of the level set {phi_m = const} inside M_support.
inline std::vector<CVec> level_tangent_basis(const WeightAction& A, const PointM& u,
                                             const std::vector<bool>& support, const Mat& Xi) {
    const Model& m = A.model;
    auto T = tangent_basis(m, u, &support);
    const int n = int(T.size());
    std::vector<CVec> X;
    for (Eigen::Index a = 0; a < Xi.cols(); ++a) X.push_back(field_X(A, Xi.col(a), u));
    // constraint rows omega(X_a, e_b) = d phi_{xi_a}(e_b)
    Mat C(X.size(), n);
    for (std::size_t a = 0; a < X.size(); ++a)
        for (int b = 0; b < n; ++b) C(a, b) = kahler_omega(m, X[a], T[b]);
    // tangent basis T is orthogonal with B = 2 l I per factor block; work in B-orthonormal coords
    Vec scale(n);
    for (int b = 0; b < n; ++b) scale[b] = std::sqrt(metric_B(m, T[b], T[b]));
    Mat Cs = C * scale.cwiseInverse().asDiagonal();
    Mat K;
    if (Cs.rows() == 0) {
        K = Mat::Identity(n, n);
    } else {
        Eigen::JacobiSVD<Mat> svd(Cs, Eigen::ComputeFullV);
        int rank = 0;
        for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
            if (svd.singularValues()[i] > 1e-12 * std::max(1.0, svd.singularValues()[0])) ++rank;
        K = svd.matrixV().rightCols(n - rank);
    }
    std::vector<CVec> out;
    for (Eigen::Index c = 0; c < K.cols(); ++c) {
        CVec v = CVec::Zero(u.z.size());
        for (int b = 0; b < n; ++b) v += (K(b, c) / scale[b]) * T[b];
        out.push_back(v);
    }
    return out;
}

/// sqrt det B(v_a, v_b), evaluated on normalized vectors so that uniformly small
/// families do not underflow. Returns -1 when the family is numerically dependent.
inline double gram_volume(const Model& m, const std::vector<CVec>& vs) {
    const int n = int(vs.size());
    if (n == 0) return 1.0;
    Vec len(n);
    for (int a = 0; a < n; ++a) len[a] = std::sqrt(metric_B(m, vs[a], vs[a]));
    if (len.minCoeff() == 0.0) return 0.0;
    Mat G(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) G(a, b) = G(b, a) = metric_B(m, vs[a], vs[b]) / (len[a] * len[b]);
    double det = G.determinant();
    if (!(det > 1e-24)) return -1.0;
    return len.prod() * std::sqrt(det);
}

/// Jacobian of Lambda(xi, u) = exp(i xi) u with respect to dvol(m) x dvol(S) at (xi, u).
/// `Xi` is an orthonormal basis of m (algebra units), `slice` an orthonormal tangent basis of S at u.
inline double jacobian_tau(const WeightAction& A, const Vec& xi, const PointM& u, const Mat& Xi,
                           const std::vector<CVec>& slice) {
    PointM y = imaginary_flow(A, xi, 1.0, u);
    std::vector<CVec> img;
    for (Eigen::Index a = 0; a < Xi.cols(); ++a) img.push_back(cplx(0, 1) * field_X(A, Xi.col(a), y));
    for (const auto& v : slice) img.push_back(flow_differential(A, xi, u, v));
    // determinant in an orthonormal frame of T_y M_support: unlike the Gram determinant
    // this keeps directions that shrink at different exponential rates resolved
    auto sup = support_of(u);
    auto T = tangent_basis(A.model, y, &sup);
    if (T.size() != img.size()) throw NumericalError("jacobian_tau: slice dimension mismatch");
    const int n = int(T.size());
    Mat C(n, n);
    for (int b = 0; b < n; ++b) {
        double nb = std::sqrt(metric_B(A.model, T[b], T[b]));
        for (int a = 0; a < n; ++a) C(b, a) = metric_B(A.model, img[a], T[b]) / nb;
    }
    double t = n ? std::abs(C.partialPivLu().determinant()) : 1.0;
    if (!std::isfinite(t)) t = -1.0;
    if (t < 0.0) throw NumericalError("jacobian_tau: degenerate differential at |xi|=" + std::to_string(xi.norm()));
    return t;
}

// ---------------------------------------------------------------------------------------------

struct QuadTolerance {
    double rel = 1e-11;
    unsigned depth = 12;
};

template <class F>
inline double integrate_unit(F&& f, const QuadTolerance& q = {}, double* err = nullptr) {
    double e = 0.0;
    double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, 0.0, 1.0, q.depth, q.rel, &e);
    if (err) *err = e;
    if (!std::isfinite(v)) throw NumericalError("quadrature produced a non-finite value");
    return v;
}

/// f(xi, x) = 2 int_0^1 phi_xi(exp(i t xi) x) dt.
inline double flow_potential_value(const WeightAction& A, const Vec& xi, const PointM& p,
                                   const QuadTolerance& q = {}) {
    if (xi.norm() == 0.0) return 0.0;
    return integrate_unit([&](double t) { return 2.0 * moment_map(A, imaginary_flow(A, xi, t, p)).dot(xi); }, q);
}

struct FlowPotentialReport {
    double value = 0.0;
    Vec gradient;         // over orthonormal coordinates of m
    Mat hessian_at_zero;  // same coordinates
};

/// Value at xi, gradient and Hessian at zero with respect to coordinates c in xi = Xi c.
inline FlowPotentialReport flow_potential(const WeightAction& A, const Vec& xi, const PointM& p, const Mat& Xi,
                                          double h = 1e-3) {
    FlowPotentialReport r;
    r.value = flow_potential_value(A, xi, p);
    const Eigen::Index m = Xi.cols();
    Vec c0 = Xi.colPivHouseholderQr().solve(xi);
    auto F = [&](const Vec& c) { return flow_potential_value(A, Xi * c, p); };
    r.gradient.resize(m);
    for (Eigen::Index a = 0; a < m; ++a) {
        auto d = [&](double s) {
            Vec cp = c0, cm = c0;
            cp[a] += s;
            cm[a] -= s;
            return (F(cp) - F(cm)) / (2 * s);
        };
        r.gradient[a] = (4 * d(h / 2) - d(h)) / 3;
    }
    r.hessian_at_zero = detail::fd_hessian(F, Vec::Zero(m), h);
    return r;
}

/// Divergence of J X^xi at p, from the closed-form imaginary flow.
inline double divergence_JX(const WeightAction& A, const Vec& xi, const PointM& p) {
    FlowMap flow = [&](double t, const PointM& q) { return imaginary_flow(A, xi, t, q); };
    return divergence_from_flow(A.model, flow, p);
}

/// g(xi, x) = int_0^1 (L_{JX^xi} eps)/(2 eps) (exp(i t xi) x) dt.
inline double halfform_exponent(const WeightAction& A, const Vec& xi, const PointM& p,
                                const QuadTolerance& q = {1e-9, 6}) {
    if (xi.norm() == 0.0) return 0.0;
    return integrate_unit([&](double t) { return 0.5 * divergence_JX(A, xi, imaginary_flow(A, xi, t, p)); }, q);
}

namespace detail {
/// log sum_{i in block j} |z_i|^2 exp(-2 t <W_i, xi>)
inline double log_block_mass(const WeightAction& A, const Vec& xi, double t, const PointM& p, int j) {
    const Model& m = A.model;
    double mx = -std::numeric_limits<double>::infinity();
    for (int i = m.offset(j); i < m.offset(j) + m.block_size(j); ++i)
        if (p.z[i] != 0.0) mx = std::max(mx, std::log(std::norm(p.z[i])) - 2 * t * A.weight(i).dot(xi));
    double s = 0.0;
    for (int i = m.offset(j); i < m.offset(j) + m.block_size(j); ++i)
        if (p.z[i] != 0.0) s += std::exp(std::log(std::norm(p.z[i])) - 2 * t * A.weight(i).dot(xi) - mx);
    return mx + std::log(s);
}
} // namespace detail

/// Closed form of f: phi_xi along the flow is half the derivative of sum_j l_j log R_j(t).
inline double flow_potential_closed(const WeightAction& A, const Vec& xi, const PointM& p) {
    const Model& m = A.model;
    double f = -2.0 * A.c().dot(xi);
    for (int j = 0; j < m.num_factors(); ++j)
        f += m.bundle_degrees[j] * (detail::log_block_mass(A, xi, 1.0, p, j) - detail::log_block_mass(A, xi, 0.0, p, j));
    return f;
}

/// Closed form of g, from div(J X^xi) = -2 (n_j + 1) (psi_j - mean_j) on each factor.
inline double halfform_exponent_closed(const WeightAction& A, const Vec& xi, const PointM& p) {
    const Model& m = A.model;
    double g = 0.0;
    for (int j = 0; j < m.num_factors(); ++j) {
        double mean = 0.0;
        for (int i = m.offset(j); i < m.offset(j) + m.block_size(j); ++i) mean -= A.weight(i).dot(xi);
        mean /= m.block_size(j);
        double half_log = 0.5 * (detail::log_block_mass(A, xi, 1.0, p, j) - detail::log_block_mass(A, xi, 0.0, p, j));
        g -= (m.factors[j] + 1) * (half_log - mean);
    }
    return g;
}

enum class Twist { plain, halfform };

inline const char* to_string(Twist t) { return t == Twist::plain ? "plain" : "halfform"; }

/// Pointwise norm square at exp(i xi) x from its value at x, for an invariant section.
inline double norm_transport(const WeightAction& A, Twist kind, int k, const Vec& xi, const PointM& p,
                             double norm_at_p) {
    if (norm_at_p < 0) throw ConfigError("pointwise norm must be nonnegative");
    double e = double(k) * flow_potential_value(A, xi, p);
    if (kind == Twist::halfform) e += halfform_exponent(A, xi, p);
    return norm_at_p * std::exp(-e);
}

} // namespace gqlab
