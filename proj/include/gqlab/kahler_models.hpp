#pragma once

#include "common.hpp"

#include <functional>
#include <optional>

namespace gqlab {

/// M = CP^{n_1} x ... x CP^{n_r} with line bundle O(l_1, ..., l_r).
struct Model {
    std::vector<int> factors;
    std::vector<int> bundle_degrees;
    bool metaplectic_allowed = false;

    int num_factors() const { return int(factors.size()); }
    int dim() const { return std::accumulate(factors.begin(), factors.end(), 0); }
    int num_coords() const { return dim() + num_factors(); }
    int offset(int j) const {
        int o = 0;
        for (int i = 0; i < j; ++i) o += factors[i] + 1;
        return o;
    }
    int block_size(int j) const { return factors[j] + 1; }
    int block_of(int coord) const {
        for (int j = 0, o = 0; j < num_factors(); o += factors[j] + 1, ++j)
            if (coord < o + factors[j] + 1) return j;
        throw ConfigError("coordinate index out of range");
    }
    bool operator==(const Model&) const = default;
};

inline Model make_model(std::vector<int> factors, std::vector<int> degrees) {
    if (factors.empty()) throw ConfigError("model needs at least one factor");
    if (factors.size() != degrees.size())
        throw ConfigError("factors and bundle_degrees differ in length");
    for (int n : factors)
        if (n < 1) throw ConfigError("factor dimension must be >= 1");
    for (int l : degrees)
        if (l < 1) throw ConfigError("bundle degree must be >= 1");
    Model m{std::move(factors), std::move(degrees), true};
    for (int n : m.factors)
        if ((n + 1) % 2 != 0) m.metaplectic_allowed = false;
    return m;
}

/// Homogeneous coordinates, one unit block per factor, first nonzero entry of
/// every block real and positive.
struct PointM {
    CVec z;
};

inline cplx canonical_phase(const CVec& block, double tol = 1e-300) {
    for (Eigen::Index i = 0; i < block.size(); ++i)
        if (std::abs(block[i]) > tol) return block[i] / std::abs(block[i]);
    return 1.0;
}

inline PointM make_point(const Model& m, const CVec& raw) {
    if (raw.size() != m.num_coords()) throw ConfigError("point has wrong number of coordinates");
    PointM p{raw};
    for (int j = 0; j < m.num_factors(); ++j) {
        auto b = p.z.segment(m.offset(j), m.block_size(j));
        double n = b.norm();
        if (!(n > 0.0) || !std::isfinite(n)) throw ConfigError("degenerate homogeneous coordinates");
        b /= n;
        b *= std::conj(canonical_phase(b));
    }
    return p;
}

inline bool same_point(const Model& m, const PointM& a, const PointM& b, double tol = 1e-12) {
    PointM ca = make_point(m, a.z), cb = make_point(m, b.z);
    return (ca.z - cb.z).cwiseAbs().maxCoeff() < tol;
}

/// Fubini-Study distance-like gap, max over factors of the chordal distance.
inline double point_distance(const Model& m, const PointM& a, const PointM& b) {
    double d = 0.0;
    for (int j = 0; j < m.num_factors(); ++j) {
        auto x = a.z.segment(m.offset(j), m.block_size(j));
        auto y = b.z.segment(m.offset(j), m.block_size(j));
        double c = std::abs(x.dot(y)) / (x.norm() * y.norm());
        d = std::max(d, std::sqrt(std::max(0.0, 1.0 - c * c)));
    }
    return d;
}

// Tangent vectors at p are horizontal lifts: a complex vector v with v_j orthogonal to z_j in
// every block. J is multiplication by i.

inline double metric_B(const Model& m, const CVec& u, const CVec& v) {
    double s = 0.0;
    for (int j = 0; j < m.num_factors(); ++j)
        s += 2.0 * m.bundle_degrees[j] *
             u.segment(m.offset(j), m.block_size(j)).dot(v.segment(m.offset(j), m.block_size(j))).real();
    return s;
}

inline double kahler_omega(const Model& m, const CVec& u, const CVec& v) {
    double s = 0.0;
    for (int j = 0; j < m.num_factors(); ++j)
        s += 2.0 * m.bundle_degrees[j] *
             u.segment(m.offset(j), m.block_size(j)).dot(v.segment(m.offset(j), m.block_size(j))).imag();
    return s;
}

inline CVec horizontal(const Model& m, const PointM& p, CVec v) {
    for (int j = 0; j < m.num_factors(); ++j) {
        auto z = p.z.segment(m.offset(j), m.block_size(j));
        auto b = v.segment(m.offset(j), m.block_size(j));
        b -= z * z.dot(b);
    }
    return v;
}

/// Real tangent basis at p. With a support mask only directions inside the submanifold
/// {z_i = 0 for i outside the mask} are returned. Vectors come in pairs (e, Je).
inline std::vector<CVec> tangent_basis(const Model& m, const PointM& p,
                                       const std::vector<bool>* support = nullptr) {
    std::vector<CVec> out;
    for (int j = 0; j < m.num_factors(); ++j) {
        int o = m.offset(j), s = m.block_size(j);
        std::vector<int> idx;
        for (int i = 0; i < s; ++i)
            if (!support || (*support)[o + i]) idx.push_back(i);
        if (idx.size() < 2) continue;
        CVec z(idx.size());
        for (std::size_t a = 0; a < idx.size(); ++a) z[a] = p.z[o + idx[a]];
        Eigen::HouseholderQR<CMat> qr(z);
        CMat q = qr.householderQ() * CMat::Identity(idx.size(), idx.size());
        for (std::size_t c = 1; c < idx.size(); ++c) {
            CVec e = CVec::Zero(m.num_coords());
            for (std::size_t a = 0; a < idx.size(); ++a) e[o + idx[a]] = q(a, c);
            out.push_back(e);
            out.push_back(cplx(0, 1) * e);
        }
    }
    return out;
}

struct ChartFrame {
    PointM base;
    std::vector<CVec> basis;
    Mat B, omega, J;
};

inline ChartFrame frame_at(const Model& m, const PointM& p) {
    for (int j = 0; j < m.num_factors(); ++j)
        if (p.z.segment(m.offset(j), m.block_size(j)).norm() < 1e-300)
            throw ConfigError("degenerate coordinates in factor " + std::to_string(j));
    ChartFrame f;
    f.base = p;
    f.basis = tangent_basis(m, p);
    const int n = int(f.basis.size());
    f.B.resize(n, n);
    f.omega.resize(n, n);
    Mat BJ(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            f.B(a, b) = metric_B(m, f.basis[a], f.basis[b]);
            f.omega(a, b) = kahler_omega(m, f.basis[a], f.basis[b]);
            BJ(a, b) = metric_B(m, f.basis[a], cplx(0, 1) * f.basis[b]);
        }
    f.J = f.B.ldlt().solve(BJ);
    return f;
}

/// Largest deviation from J^2 = -I, B = B^T > 0, omega = -omega^T, omega(u,v) = B(Ju,v).
inline double compatibility_residual(const ChartFrame& f) {
    const Eigen::Index n = f.B.rows();
    double r = (f.J * f.J + Mat::Identity(n, n)).cwiseAbs().maxCoeff();
    r = std::max(r, (f.B - f.B.transpose()).cwiseAbs().maxCoeff());
    r = std::max(r, (f.omega + f.omega.transpose()).cwiseAbs().maxCoeff());
    // omega(e_a, e_b) = B(J e_a, e_b) = (J^T B)_{ab}
    r = std::max(r, (f.omega - f.J.transpose() * f.B).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Mat> es(f.B);
    if (es.eigenvalues().minCoeff() <= 0.0) r = std::max(r, 1.0);
    return r;
}

// ---------------------------------------------------------------------------------------------
// Affine charts. Real chart coordinates per factor: (Re w_a, Im w_a) for a != chart index.

struct Chart {
    std::vector<int> index;  // chart coordinate per factor, local to the block
};

inline Chart best_chart(const Model& m, const PointM& p) {
    Chart c;
    for (int j = 0; j < m.num_factors(); ++j) {
        Eigen::Index k;
        p.z.segment(m.offset(j), m.block_size(j)).cwiseAbs().maxCoeff(&k);
        c.index.push_back(int(k));
    }
    return c;
}

inline Vec to_chart(const Model& m, const Chart& c, const PointM& p) {
    Vec x(2 * m.dim());
    int r = 0;
    for (int j = 0; j < m.num_factors(); ++j) {
        int o = m.offset(j);
        cplx zc = p.z[o + c.index[j]];
        if (std::abs(zc) < 1e-300) throw NumericalError("point outside chart");
        for (int i = 0; i < m.block_size(j); ++i) {
            if (i == c.index[j]) continue;
            cplx w = p.z[o + i] / zc;
            x[r++] = w.real();
            x[r++] = w.imag();
        }
    }
    return x;
}

/// Unnormalized homogeneous vector (1 in the chart slot).
inline CVec chart_lift(const Model& m, const Chart& c, const Vec& x) {
    CVec z = CVec::Zero(m.num_coords());
    int r = 0;
    for (int j = 0; j < m.num_factors(); ++j) {
        int o = m.offset(j);
        for (int i = 0; i < m.block_size(j); ++i) {
            if (i == c.index[j]) { z[o + i] = 1.0; continue; }
            z[o + i] = cplx(x[r], x[r + 1]);
            r += 2;
        }
    }
    return z;
}

inline PointM from_chart(const Model& m, const Chart& c, const Vec& x) {
    return make_point(m, chart_lift(m, c, x));
}

/// Horizontal lifts (at the canonical representative) of the coordinate vectors d/dx_a.
inline std::vector<CVec> chart_pushforward(const Model& m, const Chart& c, const Vec& x) {
    CVec zh = chart_lift(m, c, x);
    PointM p = make_point(m, zh);
    std::vector<CVec> out;
    int r = 0;
    for (int j = 0; j < m.num_factors(); ++j) {
        int o = m.offset(j), s = m.block_size(j);
        auto blk = zh.segment(o, s);
        double nrm = blk.norm();
        cplx ph = canonical_phase(blk);
        CVec zu = blk / nrm;
        for (int i = 0; i < s; ++i) {
            if (i == c.index[j]) continue;
            for (int part = 0; part < 2; ++part) {
                CVec d = CVec::Zero(s);
                d[i] = part == 0 ? cplx(1, 0) : cplx(0, 1);
                CVec h = (d - zu * zu.dot(d)) / nrm;
                CVec v = CVec::Zero(m.num_coords());
                v.segment(o, s) = std::conj(ph) * h;
                out.push_back(v);
                ++r;
            }
        }
    }
    (void)p;
    return out;
}

/// Riemannian volume density of the chart, dvol = rho dx.
inline double chart_density(const Model& m, const Chart& c, const Vec& x) {
    auto e = chart_pushforward(m, c, x);
    const int n = int(e.size());
    Mat G(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) G(a, b) = G(b, a) = metric_B(m, e[a], e[b]);
    return std::sqrt(G.determinant());
}

/// Kahler form in chart coordinates.
inline Mat chart_omega(const Model& m, const Chart& c, const Vec& x) {
    auto e = chart_pushforward(m, c, x);
    const int n = int(e.size());
    Mat W(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) W(a, b) = kahler_omega(m, e[a], e[b]);
    return W;
}

/// Chart components of a tangent vector (least squares against the pushforward basis).
inline Vec chart_components(const Model& m, const Chart& c, const Vec& x, const CVec& v) {
    auto e = chart_pushforward(m, c, x);
    const int n = int(e.size());
    Mat G(n, n);
    Vec rhs(n);
    for (int a = 0; a < n; ++a) {
        rhs[a] = metric_B(m, e[a], v);
        for (int b = 0; b < n; ++b) G(a, b) = metric_B(m, e[a], e[b]);
    }
    return G.ldlt().solve(rhs);
}

// ---------------------------------------------------------------------------------------------

struct QuadratureConfig {
    long samples = 100000;
    std::uint64_t seed = 1;
    double stderr_target = 0.0;  // 0 disables the check
};

/// Monte Carlo estimate of the symplectic volume. Samples come from a multivariate Cauchy
/// proposal in the standard affine chart of every factor.
inline Estimate liouville_volume(const Model& m, const QuadratureConfig& q) {
    if (q.samples <= 0) throw ConfigError("sample budget must be positive");
    auto rng = make_rng(q.seed, 0x11);
    std::normal_distribution<double> g;
    Chart c;
    c.index.assign(m.num_factors(), 0);
    std::vector<double> vals(q.samples);
    for (long s = 0; s < q.samples; ++s) {
        Vec x(2 * m.dim());
        double logq = 0.0;
        int r = 0;
        for (int j = 0; j < m.num_factors(); ++j) {
            int d = 2 * m.factors[j];
            double chi = g(rng);
            double r2 = 0.0;
            for (int a = 0; a < d; ++a) {
                x[r + a] = g(rng) / std::abs(chi);
                r2 += x[r + a] * x[r + a];
            }
            r += d;
            // multivariate Cauchy density in R^d
            logq += std::lgamma((d + 1) / 2.0) - ((d + 1) / 2.0) * std::log(kPi) -
                    ((d + 1) / 2.0) * std::log1p(r2);
        }
        vals[s] = chart_density(m, c, x) / std::exp(logq);
    }
    Estimate e = mean_stderr(vals);
    if (q.stderr_target > 0 && e.error > q.stderr_target * e.value)
        throw NumericalError("liouville_volume: stderr target not met");
    return e;
}

namespace detail {

inline Mat fd_hessian(const std::function<double(const Vec&)>& F, const Vec& x, double h) {
    const Eigen::Index n = x.size();
    auto raw = [&](double s) {
        Mat H(n, n);
        for (Eigen::Index a = 0; a < n; ++a)
            for (Eigen::Index b = a; b < n; ++b) {
                Vec pp = x, pm = x, mp = x, mm = x;
                pp[a] += s; pp[b] += s;
                pm[a] += s; pm[b] -= s;
                mp[a] -= s; mp[b] += s;
                mm[a] -= s; mm[b] -= s;
                H(a, b) = H(b, a) = (F(pp) - F(pm) - F(mp) + F(mm)) / (4.0 * s * s);
            }
        return H;
    };
    return (4.0 * raw(h / 2) - raw(h)) / 3.0;
}

inline Mat chart_J(int n) {
    Mat J = Mat::Zero(2 * n, 2 * n);
    for (int a = 0; a < n; ++a) {
        J(2 * a + 1, 2 * a) = 1.0;
        J(2 * a, 2 * a + 1) = -1.0;
    }
    return J;
}

} // namespace detail

/// Curvature 2-form i d d-bar of -log|e|^2 for the standard frame of L^k, in chart coordinates,
/// obtained from a finite-difference Hessian.
inline Mat curvature_form(const Model& m, int k, const PointM& p, double h = 1e-4) {
    Chart c = best_chart(m, p);
    Vec x = to_chart(m, c, p);
    auto Phi = [&](const Vec& y) {
        CVec z = chart_lift(m, c, y);
        double s = 0.0;
        for (int j = 0; j < m.num_factors(); ++j)
            s += double(k) * m.bundle_degrees[j] * std::log(z.segment(m.offset(j), m.block_size(j)).squaredNorm());
        return s;
    };
    Mat H = detail::fd_hessian(Phi, x, h);
    Mat J = detail::chart_J(m.dim());
    return 0.5 * (J.transpose() * H - H * J);
}

/// Max deviation of the finite-difference curvature of L^k from k omega.
inline double check_prequantum(const Model& m, int k, const PointM& p, double h = 1e-4) {
    if (k < 1) throw ConfigError("k must be >= 1");
    Chart c = best_chart(m, p);
    Vec x = to_chart(m, c, p);
    Mat W = chart_omega(m, c, x);
    return (curvature_form(m, k, p, h) - double(k) * W).cwiseAbs().maxCoeff();
}

using VectorField = std::function<CVec(const PointM&)>;
using FlowMap = std::function<PointM(double, const PointM&)>;

/// (L_V eps)/eps at p from a flow map: central difference in t of the log volume distortion.
inline double divergence_from_flow(const Model& m, const FlowMap& flow, const PointM& p,
                                   double ht = 1e-3, double hx = 1e-6) {
    Chart c = best_chart(m, p);
    Vec x0 = to_chart(m, c, p);
    const Eigen::Index n = x0.size();
    const double logrho0 = std::log(chart_density(m, c, x0));
    auto logJ = [&](double t) {
        auto F = [&](const Vec& x) { return to_chart(m, c, flow(t, from_chart(m, c, x))); };
        Mat D(n, n);
        for (Eigen::Index a = 0; a < n; ++a) {
            Vec xp = x0, xm = x0;
            xp[a] += hx;
            xm[a] -= hx;
            D.col(a) = (F(xp) - F(xm)) / (2.0 * hx);
        }
        Vec y = F(x0);
        return std::log(std::abs(D.determinant())) + std::log(chart_density(m, c, y)) - logrho0;
    };
    auto d = [&](double s) { return (logJ(s) - logJ(-s)) / (2.0 * s); };
    return (4.0 * d(ht / 2) - d(ht)) / 3.0;
}

/// Flow of a vector field by classical RK4 in chart coordinates.
inline PointM integrate_field(const Model& m, const VectorField& V, const PointM& p, double t,
                              int steps = 4) {
    if (t == 0.0) return p;
    Chart c = best_chart(m, p);
    Vec x = to_chart(m, c, p);
    auto rhs = [&](const Vec& y) {
        PointM q = from_chart(m, c, y);
        return chart_components(m, c, y, V(q));
    };
    double h = t / steps;
    for (int s = 0; s < steps; ++s) {
        Vec k1 = rhs(x);
        Vec k2 = rhs(x + 0.5 * h * k1);
        Vec k3 = rhs(x + 0.5 * h * k2);
        Vec k4 = rhs(x + h * k3);
        x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return from_chart(m, c, x);
}

/// (L_V eps_omega)/eps_omega at p for a general vector field.
inline double divergence_liouville(const Model& m, const VectorField& V, const PointM& p) {
    FlowMap flow = [&](double t, const PointM& q) { return integrate_field(m, V, q, t, 2); };
    return divergence_from_flow(m, flow, p);
}

/// Chart formula (1/rho) d_a(rho V^a); independent route used for cross-checks.
inline double divergence_chart(const Model& m, const VectorField& V, const PointM& p, double h = 1e-5) {
    Chart c = best_chart(m, p);
    Vec x0 = to_chart(m, c, p);
    double s = 0.0;
    for (Eigen::Index a = 0; a < x0.size(); ++a) {
        auto g = [&](double e) {
            Vec y = x0;
            y[a] += e;
            PointM q = from_chart(m, c, y);
            return chart_density(m, c, y) * chart_components(m, c, y, V(q))[a];
        };
        s += (g(h) - g(-h)) / (2.0 * h);
    }
    return s / chart_density(m, c, x0);
}

/// Uniform random point for the symplectic measure.
inline PointM random_point(const Model& m, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    CVec z(m.num_coords());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = cplx(g(rng), g(rng));
    return make_point(m, z);
}

/// Symplectic volume (2 pi l)^n / n! per factor, multiplied.
inline double exact_volume(const Model& m) {
    double v = 1.0;
    for (int j = 0; j < m.num_factors(); ++j)
        v *= std::pow(kTwoPi * m.bundle_degrees[j], m.factors[j]) / std::tgamma(m.factors[j] + 1.0);
    return v;
}

} // namespace gqlab
