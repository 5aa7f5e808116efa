#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gqlab {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using IMat = Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>;
using IVec = Eigen::Matrix<long, Eigen::Dynamic, 1>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Bad input: invalid model, action, scenario or call arguments.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A computation did not converge or hit a degenerate configuration.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Rational {
    long num = 0;
    long den = 1;

    Rational() = default;
    Rational(long n, long d = 1) : num(n), den(d) {
        if (den == 0) throw ConfigError("rational with zero denominator");
        if (den < 0) { num = -num; den = -den; }
        long g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) { num /= g; den /= g; }
    }

    double value() const { return double(num) / double(den); }
    bool is_integer() const { return den == 1; }
    Rational operator*(long k) const { return Rational(num * k, den); }
    bool operator==(const Rational&) const = default;

    static Rational parse(const std::string& s) {
        auto slash = s.find('/');
        try {
            if (slash == std::string::npos) return Rational(std::stol(s), 1);
            return Rational(std::stol(s.substr(0, slash)), std::stol(s.substr(slash + 1)));
        } catch (const std::logic_error&) {
            throw ConfigError("cannot parse rational '" + s + "'");
        }
    }
    std::string str() const {
        return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
    }
};

/// A value with a one-sigma error estimate.
struct Estimate {
    double value = 0.0;
    double error = 0.0;
};

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32),
                      std::uint32_t(stream), std::uint32_t(stream >> 32)};
    return std::mt19937_64(seq);
}

/// Pairwise summation so that sums do not depend on how work was chunked.
inline double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    std::size_t h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

/// Mean and standard error of a sample.
inline Estimate mean_stderr(const std::vector<double>& x) {
    if (x.empty()) return {};
    double n = double(x.size());
    double mean = pairwise_sum(x) / n;
    std::vector<double> sq(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) sq[i] = (x[i] - mean) * (x[i] - mean);
    double var = x.size() > 1 ? pairwise_sum(sq) / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n)};
}

/// Least-squares line y = a + b x with coefficient of determination.
struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double r2 = 0.0;
    double slope_stderr = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw NumericalError("fit_line needs at least two points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
    mx /= double(n);
    my /= double(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = syy - f.slope * sxy;
    f.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
    if (n > 2) f.slope_stderr = std::sqrt(std::max(sse, 0.0) / double(n - 2) / sxx);
    return f;
}

} // namespace gqlab
