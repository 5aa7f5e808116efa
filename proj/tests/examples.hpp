#pragma once

// The three desk examples and small helpers shared by the test binaries.

#include <gqlab/asymptotics_lab.hpp>

namespace gqtest {

using namespace gqlab;

inline IMat row(std::initializer_list<long> w) {
    IMat W(1, long(w.size()));
    long i = 0;
    for (long v : w) W(0, i++) = v;
    return W;
}

// CP^1, O(1), weights (1,-1)
inline WeightAction e1() { return make_action(make_model({1}, {1}), row({1, -1}), {Rational{0, 1}}); }
// CP^2, O(1), weights (1,-1,0)
inline WeightAction e2() { return make_action(make_model({2}, {1}), row({1, -1, 0}), {Rational{0, 1}}); }
// CP^1 x CP^1, O(1,1), weights (1,0 | -1,0)
inline WeightAction e3(Rational c = {0, 1}) {
    return make_action(make_model({1, 1}, {1, 1}), row({1, 0, -1, 0}), {c});
}

inline PointM pt(const Model& m, std::initializer_list<cplx> z) {
    CVec v(long(z.size()));
    long i = 0;
    for (auto x : z) v[i++] = x;
    return make_point(m, v);
}

inline const StratumLabel& stratum(const std::vector<StratumLabel>& s, const Model& m, const std::string& label) {
    for (const auto& L : s)
        if (support_string(m, L.support) == label) return L;
    throw std::runtime_error("no stratum " + label);
}

// random point of the zero level of E2 with all coordinates nonzero
inline PointM e2_level_point(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(0.05, 0.95), P(0.0, kTwoPi);
    double r2 = U(rng);  // |z0|^2 = |z1|^2 = r2 / 2
    double a = std::sqrt(r2 / 2), b = std::sqrt(1 - r2);
    CVec z(3);
    z << a, std::polar(a, P(rng)), std::polar(b, P(rng));
    return make_point(e2().model, z);
}

} // namespace gqtest
