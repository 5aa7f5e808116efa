#pragma once

// Config-driven scenarios: validation, a human summary, and the full run writing
// JSON/CSV outputs plus a manifest with content hashes.

#include "asymptotics_lab.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace gqlab {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.3.0";

struct Quantities {
    bool strata = true, gram = true, density = true, unitarity = true, consistency = true;
};

struct Scenario {
    std::string name = "scenario";
    std::vector<int> factors, degrees;
    IMat W;
    std::vector<Rational> shift;
    std::vector<int> k_list;
    std::vector<Twist> twists;
    std::vector<int> norm_defs{1, 2};
    long samples = 20000;
    int slice_order = 61;
    double fiber_rel_tol = 1e-9;
    double r_selection_rel = 0.25;
    double flag_ratio = 0.2;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    Quantities only;
    json resolved;  // canonical form with defaults applied

    Model model() const { return make_model(factors, degrees); }
    WeightAction action() const { return make_action(model(), W, shift); }
    GramOptions gram_options() const {
        GramOptions o;
        o.slice_order = slice_order;
        o.fiber.rel_tol = fiber_rel_tol;
        o.flag_ratio = flag_ratio;
        return o;
    }
};

struct Validation {
    std::optional<Scenario> scenario;
    std::vector<std::string> errors;
};

namespace detail {

inline std::optional<Rational> rational_from_json(const json& v) {
    try {
        if (v.is_number_integer()) return Rational::parse(std::to_string(v.get<long>()));
        if (v.is_string()) return Rational::parse(v.get<std::string>());
    } catch (const std::exception&) {
    }
    return std::nullopt;
}

inline Quantities parse_only(const std::string& list, std::vector<std::string>& errors, const std::string& path) {
    Quantities q{false, false, false, false, false};
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "strata") q.strata = true;
        else if (item == "gram") q.gram = true;
        else if (item == "density") q.density = true;
        else if (item == "unitarity") q.unitarity = true;
        else if (item == "consistency") q.consistency = true;
        else if (item == "all") q = Quantities{};
        else errors.push_back(path + ": unknown quantity '" + item + "'");
    }
    return q;
}

} // namespace detail

/// Parses and checks a scenario; every violation is reported with its JSON path.
inline Validation validate(const std::string& text) {
    Validation out;
    auto& err = out.errors;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        err.push_back(std::string("config: invalid JSON: ") + e.what());
        return out;
    }
    if (!j.is_object()) {
        err.push_back("config: top level must be an object");
        return out;
    }
    Scenario s;
    s.name = j.value("name", s.name);

    const json model = j.value("model", json::object());
    try {
        s.factors = model.at("factors").get<std::vector<int>>();
        s.degrees = model.at("bundle_degrees").get<std::vector<int>>();
    } catch (const std::exception&) {
        err.push_back("model: needs integer arrays 'factors' and 'bundle_degrees'");
    }
    std::optional<Model> m;
    if (err.empty()) {
        try {
            m = make_model(s.factors, s.degrees);
        } catch (const ConfigError& e) {
            err.push_back(std::string("model: ") + e.what());
        }
    }

    const json action = j.value("action", json::object());
    std::vector<std::vector<long>> rows;
    try {
        rows = action.at("weights").get<std::vector<std::vector<long>>>();
    } catch (const std::exception&) {
        err.push_back("action.weights: needs an integer matrix");
    }
    int rank = action.value("rank", int(rows.size()));
    if (!rows.empty() && rank != int(rows.size()))
        err.push_back("action.rank: " + std::to_string(rank) + " does not match " + std::to_string(rows.size()) +
                      " weight rows");
    if (rows.empty() && err.empty()) err.push_back("action.weights: at least one row required");
    if (m && !rows.empty()) {
        s.W = IMat(rows.size(), m->num_coords());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (int(rows[r].size()) != m->num_coords()) {
                err.push_back("action.weights[" + std::to_string(r) + "]: expected " + std::to_string(m->num_coords()) +
                              " entries, got " + std::to_string(rows[r].size()));
                continue;
            }
            for (int c = 0; c < m->num_coords(); ++c) s.W(r, c) = rows[r][c];
        }
    }
    if (action.contains("shift")) {
        const json& sh = action["shift"];
        if (!sh.is_array()) {
            err.push_back("action.shift: must be an array");
        } else {
            for (std::size_t i = 0; i < sh.size(); ++i) {
                auto r = detail::rational_from_json(sh[i]);
                if (!r) err.push_back("action.shift[" + std::to_string(i) + "]: expected an integer or \"p/q\"");
                else s.shift.push_back(*r);
            }
            if (!rows.empty() && s.shift.size() != rows.size())
                err.push_back("action.shift: length must equal the torus rank");
        }
    } else {
        s.shift.assign(rows.size(), Rational{0, 1});
    }

    if (!j.contains("k_list") || !j["k_list"].is_array() || j["k_list"].empty()) {
        err.push_back("k_list: must be a nonempty array");
    } else {
        for (std::size_t i = 0; i < j["k_list"].size(); ++i) {
            const auto& v = j["k_list"][i];
            if (!v.is_number_integer() || v.get<int>() < 1) {
                err.push_back("k_list[" + std::to_string(i) + "]: must be an integer >= 1");
                continue;
            }
            int k = v.get<int>();
            if (!s.k_list.empty() && k <= s.k_list.back())
                err.push_back("k_list[" + std::to_string(i) + "]: must be strictly increasing");
            s.k_list.push_back(k);
        }
    }

    std::string tw = j.value("twist", std::string("plain"));
    if (tw == "plain") s.twists = {Twist::plain};
    else if (tw == "halfform") s.twists = {Twist::halfform};
    else if (tw == "both") s.twists = {Twist::plain, Twist::halfform};
    else err.push_back("twist: expected plain, halfform or both");
    if (m && !m->metaplectic_allowed)
        for (auto t : s.twists)
            if (t == Twist::halfform)
                err.push_back("twist: metaplectic parity violated (half-forms need every factor odd-dimensional)");

    if (j.contains("norm_defs")) {
        try {
            s.norm_defs = j["norm_defs"].get<std::vector<int>>();
        } catch (const std::exception&) {
            err.push_back("norm_defs: must be an integer array");
        }
        if (s.norm_defs.empty()) err.push_back("norm_defs: must be nonempty");
        for (int nd : s.norm_defs)
            if (nd != 1 && nd != 2) err.push_back("norm_defs: entries must be 1 or 2");
    }

    const json quad = j.value("quadrature", json::object());
    s.samples = quad.value("samples", s.samples);
    s.slice_order = quad.value("slice_order", s.slice_order);
    s.fiber_rel_tol = quad.value("fiber_rel_tol", s.fiber_rel_tol);
    if (s.samples < 1) err.push_back("quadrature.samples: must be positive");
    if (s.slice_order != 61 && s.slice_order != 31) err.push_back("quadrature.slice_order: 31 or 61");
    if (!(s.fiber_rel_tol > 0)) err.push_back("quadrature.fiber_rel_tol: must be positive");
    const json conv = j.value("conventions", json::object());
    s.r_selection_rel = conv.value("r_selection_rel", s.r_selection_rel);
    s.flag_ratio = conv.value("flag_ratio", s.flag_ratio);
    if (!(s.r_selection_rel > 0)) err.push_back("conventions.r_selection_rel: must be positive");
    s.seed = j.value("seed", s.seed);
    s.output_dir = j.value("output_dir", s.output_dir);
    if (j.contains("quantities")) {
        const json& q = j["quantities"];
        s.only.strata = q.value("strata", true);
        s.only.gram = q.value("gram", true);
        s.only.density = q.value("density", true);
        s.only.unitarity = q.value("unitarity", true);
        s.only.consistency = q.value("consistency", true);
    }

    if (m && s.shift.size() == rows.size() && !rows.empty() && s.W.rows() == long(rows.size())) {
        for (std::size_t i = 0; i < s.k_list.size(); ++i) {
            bool ok = true;
            for (const auto& r : s.shift) ok = ok && (r * s.k_list[i]).is_integer();
            if (!ok)
                err.push_back("k_list[" + std::to_string(i) + "]: lift integrality violated (k c not integral for k=" +
                              std::to_string(s.k_list[i]) + ")");
        }
        if (err.empty()) {
            try {
                auto A = s.action();
                open_stratum_support(A);
            } catch (const ConfigError& e) {
                err.push_back(std::string("action.shift: ") + e.what());
            }
        }
    }
    if (!err.empty()) return out;

    json r;
    r["name"] = s.name;
    r["model"] = {{"factors", s.factors}, {"bundle_degrees", s.degrees}};
    json sh = json::array();
    for (const auto& x : s.shift) sh.push_back(x.str());
    r["action"] = {{"rank", s.W.rows()}, {"weights", rows}, {"shift", sh}};
    r["k_list"] = s.k_list;
    r["twist"] = tw;
    r["norm_defs"] = s.norm_defs;
    r["quadrature"] = {{"samples", s.samples}, {"slice_order", s.slice_order}, {"fiber_rel_tol", s.fiber_rel_tol}};
    r["conventions"] = {{"r_selection_rel", s.r_selection_rel}, {"flag_ratio", s.flag_ratio}};
    r["seed"] = s.seed;
    s.resolved = r;
    out.scenario = s;
    return out;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    auto v = validate(ss.str());
    if (!v.scenario) {
        std::string msg = "invalid config:";
        for (const auto& e : v.errors) msg += "\n  " + e;
        throw ConfigError(msg);
    }
    return *v.scenario;
}

// ---------------------------------------------------------------------------------------------

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
    std::string hex;
    char buf[3];
    for (unsigned i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return buf;
}

inline std::string isotropy_text(const IsotropyDescriptor& iso, int d) {
    if (iso.is_full) return "H=G";
    std::string s = iso.dim() == 0 ? "finite" : "dim " + std::to_string(iso.dim());
    if (iso.finite_part > 1) s += " Z" + std::to_string(iso.finite_part);
    else if (iso.dim() == 0) s = "trivial";
    (void)d;
    return s;
}

inline json isotropy_json(const IsotropyDescriptor& iso) {
    json b = json::array();
    for (Eigen::Index c = 0; c < iso.algebra_basis.cols(); ++c) {
        json col = json::array();
        for (Eigen::Index r = 0; r < iso.algebra_basis.rows(); ++r) col.push_back(iso.algebra_basis(r, c));
        b.push_back(col);
    }
    return {{"algebra_basis", b}, {"finite_part", iso.finite_part}, {"is_full", iso.is_full}};
}

/// Representative zero-level point of a stratum: the middle node of its quadrature rule.
inline PointM stratum_representative(const WeightAction& A, const StratumLabel& L) {
    auto q = stratum_quadrature(A, L);
    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < q.weights.size(); ++i)
        if (q.weights[i] > 0) live.push_back(i);
    if (live.empty()) throw NumericalError("stratum quadrature has no nodes");
    return q.rule.points[live[live.size() / 2]];
}

// ---------------------------------------------------------------------------------------------

inline std::string describe(const Scenario& s) {
    std::ostringstream o;
    auto A = s.action();
    const Model& m = A.model;
    o << "scenario: " << s.name << "\n";
    o << "model:";
    for (int j = 0; j < m.num_factors(); ++j) o << (j ? " x" : "") << " CP^" << m.factors[j];
    o << "  line bundle O(";
    for (int j = 0; j < m.num_factors(); ++j) o << (j ? "," : "") << m.bundle_degrees[j];
    o << ")  metaplectic " << (m.metaplectic_allowed ? "allowed" : "not allowed") << "\n";
    o << "action: rank " << A.d << "\n";
    for (int k : s.k_list)
        for (auto tw : s.twists) {
            auto all = basis_sections(m, k, tw);
            auto inv = invariant_basis(A, k, tw);
            o << "k=" << k << " (" << to_string(tw) << "): dim H = " << all.size() << ", dim H^G = " << inv.size();
            if (inv.empty()) o << "  warning: no invariant sections at k=" << k;
            o << "\n";
        }
    auto strata = combinatorial_strata(A);
    o << "strata: " << strata.size() << "\n";
    int red_dim = 0;
    for (const auto& L : strata) {
        red_dim = std::max(red_dim, L.dim_S);
        o << "  " << support_string(m, L.support) << "  isotropy " << isotropy_text(L.isotropy, A.d)
          << "  dim_S=" << L.dim_S << "  dim_upstairs=" << L.dim_upstairs << "  component " << L.component_id;
        auto dec = decompose_preimage(A, L);
        if (!dec.pieces.empty()) o << "  extra pieces " << dec.pieces.size();
        o << "\n";
    }
    if (strata.size() == 1 && red_dim == 0) o << "M0 = point\n";
    else o << "M0: complex dimension " << red_dim << "\n";
    o << "predicted limits of I_k (2^{-d/2} vol(G x)):\n";
    for (const auto& L : strata) {
        if (L.isotropy.is_full) {
            o << "  " << support_string(m, L.support) << ": 1 (H=G)\n";
            continue;
        }
        auto q = stratum_quadrature(A, L);
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (std::size_t i = 0; i < q.weights.size(); ++i)
            if (q.weights[i] > 0) {
                lo = std::min(lo, q.orbit_volumes[i]);
                hi = std::max(hi, q.orbit_volumes[i]);
            }
        double f = std::pow(2.0, -0.5 * L.dim_m());
        o << "  " << support_string(m, L.support) << ": [" << f * lo << ", " << f * hi << "]\n";
    }
    return o.str();
}

// ---------------------------------------------------------------------------------------------

inline json strata_report_json(const WeightAction& A, std::uint64_t seed) {
    SamplerConfig cfg;
    cfg.seed = seed;
    auto rep = enumerate_strata(A, cfg);
    json j;
    j["unsemistable_samples"] = rep.unsemistable_samples;
    json arr = json::array();
    for (std::size_t i = 0; i < rep.strata.size(); ++i) {
        const auto& L = rep.strata[i];
        json e;
        e["support"] = support_string(A.model, L.support);
        e["isotropy"] = isotropy_json(L.isotropy);
        e["component_id"] = L.component_id;
        e["dim_S"] = L.dim_S;
        e["dim_upstairs"] = L.dim_upstairs;
        e["flow_samples"] = rep.sample_counts[i];
        json pieces = json::array();
        for (const auto& P : decompose_preimage(A, L).pieces) {
            json lv = json::array();
            for (Eigen::Index a = 0; a < P.level.size(); ++a) lv.push_back(P.level[a]);
            pieces.push_back({{"support", support_string(A.model, P.support)},
                              {"isotropy", isotropy_json(P.isotropy_prime)},
                              {"dim_piece", P.dim_piece},
                              {"level", lv},
                              {"overlaps", P.overlaps}});
        }
        e["extra_pieces"] = pieces;
        arr.push_back(e);
    }
    j["strata"] = arr;
    return j;
}

inline json matrix_json(const std::vector<Exponent>& ids, const CMat& M, const Mat& E) {
    json j;
    j["basis"] = ids;
    json re = json::array(), im = json::array(), er = json::array();
    for (Eigen::Index a = 0; a < M.rows(); ++a) {
        json r1 = json::array(), r2 = json::array(), r3 = json::array();
        for (Eigen::Index b = 0; b < M.cols(); ++b) {
            r1.push_back(M(a, b).real());
            r2.push_back(M(a, b).imag());
            r3.push_back(E(a, b));
        }
        re.push_back(r1);
        im.push_back(r2);
        er.push_back(r3);
    }
    j["real"] = re;
    j["imag"] = im;
    j["stderr"] = er;
    return j;
}

inline json breakdown_json(const Model& m, const std::vector<PieceContribution>& parts) {
    json arr = json::array();
    for (const auto& p : parts) {
        json d = json::array(), e = json::array();
        for (Eigen::Index a = 0; a < p.diag.size(); ++a) {
            d.push_back(p.diag[a]);
            e.push_back(p.error[a]);
        }
        arr.push_back({{"kind", p.kind}, {"support", support_string(m, p.support)}, {"dim", p.dim}, {"diag", d},
                       {"stderr", e}});
    }
    return arr;
}

struct RunManifest {
    std::vector<std::string> files;
    json manifest;
};

namespace detail {

class OutputDir {
public:
    explicit OutputDir(std::string dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }
    void write(const std::string& name, const std::string& content) {
        std::ofstream f(std::filesystem::path(dir_) / name, std::ios::binary);
        if (!f) throw ConfigError("cannot write output file " + name);
        f << content;
        files_.push_back({name, content});
    }
    const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

private:
    std::string dir_;
    std::vector<std::pair<std::string, std::string>> files_;
};

} // namespace detail

/// Runs the selected quantities and writes the outputs; numeric text is fixed-format so
/// reruns with the same seed are byte-identical.
inline RunManifest run(const Scenario& s, std::ostream* log = nullptr) {
    auto A = s.action();
    const Model& m = A.model;
    const auto opts = s.gram_options();
    detail::OutputDir out(s.output_dir);
    auto say = [&](const std::string& msg) {
        if (log) *log << msg << std::endl;
    };
    auto strata = combinatorial_strata(A);

    if (s.only.strata) {
        say("strata");
        out.write("strata.json", strata_report_json(A, s.seed).dump(2) + "\n");
    }

    std::ostringstream curves, defects;
    curves << "quantity,stratum,k,value,stderr\n";
    defects << "k,twist,norm_up,norm_down,defect,stderr,min_eig,max_eig\n";
    json fits = json::array();

    if (s.only.gram || s.only.unitarity) {
        for (int k : s.k_list) {
            json up, down;
            for (auto tw : s.twists) {
                auto basis = invariant_basis(A, k, tw);
                if (basis.empty()) {
                    say("k=" + std::to_string(k) + " " + to_string(tw) + ": no invariant sections");
                    // operator on the zero space: defect 0, spectrum empty
                    if (s.only.unitarity)
                        for (int nu : {1, 2}) {
                            for (int ndn : {1, 2})
                                defects << k << "," << to_string(tw) << "," << nu << "," << ndn << "," << fmt(0.0)
                                        << "," << fmt(0.0) << ",nan,nan\n";
                            curves << (tw == Twist::plain ? "defect_A" : "defect_B") << ",norm_def_" << nu << ","
                                   << k << "," << fmt(0.0) << "," << fmt(0.0) << "\n";
                        }
                    continue;
                }
                std::map<int, GramMatrix> G;
                std::map<int, ReducedGram> R;
                for (int nd : {1, 2}) {
                    G[nd] = gram_upstairs(A, k, tw, nd, opts);
                    R[nd] = reduced_gram(A, k, tw, nd, opts.slice_order);
                }
                for (int nd : s.norm_defs) {
                    json gj = matrix_json(G[nd].basis_ids, G[nd].matrix, G[nd].error);
                    gj["flagged"] = G[nd].flagged;
                    gj["breakdown"] = breakdown_json(m, G[nd].breakdown);
                    up[to_string(tw)][std::to_string(nd)] = gj;
                    json rj = matrix_json(R[nd].basis_ids, R[nd].matrix, R[nd].error);
                    rj["breakdown"] = breakdown_json(m, R[nd].breakdown);
                    down[to_string(tw)][std::to_string(nd)] = rj;
                }
                if (s.only.unitarity) {
                    for (int nu : {1, 2})
                        for (int ndn : {1, 2}) {
                            auto d = gram_defect(R[ndn].matrix, R[ndn].error, G[nu].matrix, G[nu].error);
                            defects << k << "," << to_string(tw) << "," << nu << "," << ndn << "," << fmt(d.value)
                                    << "," << fmt(d.error) << "," << fmt(d.eigenvalues.minCoeff()) << ","
                                    << fmt(d.eigenvalues.maxCoeff()) << "\n";
                            if (nu == ndn)
                                curves << (tw == Twist::plain ? "defect_A" : "defect_B") << ",norm_def_" << nu << ","
                                       << k << "," << fmt(d.value) << "," << fmt(d.error) << "\n";
                        }
                }
            }
            if (s.only.gram) {
                json hu = {{"k", k}, {"grams", up}};
                json hd = {{"k", k}, {"grams", down}};
                out.write("gram_up_" + std::to_string(k) + ".json", hu.dump(2) + "\n");
                out.write("gram_down_" + std::to_string(k) + ".json", hd.dump(2) + "\n");
            }
        }
    }

    if (s.only.density) {
        say("densities");
        for (const auto& L : strata) {
            const std::string lab = support_string(m, L.support);
            PointM x = stratum_representative(A, L);
            double vol = L.isotropy.is_full ? 1.0 : orbit_volume(A, x, L.isotropy).value;
            DensityCurve ci{"I", lab, {}}, cj{"J", lab, {}};
            for (int k : s.k_list) {
                auto I = density_I(A, L, x, k, opts.fiber);
                ci.points.push_back({k, I.value, I.error});
                curves << "I," << lab << "," << k << "," << fmt(I.value) << "," << fmt(I.error) << "\n";
                if (m.metaplectic_allowed) {
                    auto J = density_J(A, L, x, k, opts.fiber);
                    cj.points.push_back({k, J.value, J.error});
                    curves << "J," << lab << "," << k << "," << fmt(J.value) << "," << fmt(J.error) << "\n";
                }
            }
            double limI = L.isotropy.is_full ? 1.0 : std::pow(2.0, -0.5 * L.dim_m()) * vol;
            fit_rate(ci, limI);
            fits.push_back({{"quantity", "I"}, {"stratum", lab}, {"limit", limI}, {"has_rate", ci.has_rate},
                            {"C", ci.rate_C}, {"p", ci.rate_p}});
            if (m.metaplectic_allowed) {
                fit_rate(cj, 1.0);
                fits.push_back({{"quantity", "J"}, {"stratum", lab}, {"limit", 1.0}, {"has_rate", cj.has_rate},
                                {"C", cj.rate_C}, {"p", cj.rate_p}});
            }
            for (int k : s.k_list)
                for (auto tw : s.twists) {
                    if (invariant_basis(A, k, tw).empty()) continue;
                    auto II = residual_II(A, L, k, tw, opts);
                    curves << (tw == Twist::plain ? "II" : "II_tilde") << "," << lab << "," << k << ","
                           << fmt(II.value) << "," << fmt(II.error) << "\n";
                }
        }
        out.write("curves_fit.json", fits.dump(2) + "\n");
    }
    if (s.only.density || s.only.unitarity) out.write("curves.csv", curves.str());
    if (s.only.unitarity) out.write("defects.csv", defects.str());

    if (s.only.consistency) {
        say("consistency");
        json rows = json::array();
        for (int k : s.k_list)
            for (auto tw : s.twists)
                for (const auto& r : norm_decomposition_check(A, k, tw, s.samples, s.seed + std::uint64_t(k), opts)) {
                    if (std::find(s.norm_defs.begin(), s.norm_defs.end(), r.norm_def) == s.norm_defs.end()) continue;
                    rows.push_back({{"k", r.k}, {"twist", to_string(r.twist)}, {"norm_def", r.norm_def},
                                    {"stratum", r.stratum}, {"lhs", r.lhs}, {"lhs_stderr", r.lhs_err},
                                    {"rhs", r.rhs}, {"rhs_stderr", r.rhs_err}, {"z", r.z}, {"relative", r.rel},
                                    {"skipped", r.skipped}, {"note", r.note}});
                }
        out.write("consistency.json", json{{"rows", rows}}.dump(2) + "\n");
    }

    RunManifest rm;
    json files = json::array();
    for (const auto& [name, content] : out.files()) {
        files.push_back({{"name", name}, {"sha256", sha256_hex(content)}, {"bytes", content.size()}});
        rm.files.push_back(name);
    }
    rm.manifest = {{"version", kVersion},
                   {"scenario", s.name},
                   {"config_sha256", sha256_hex(s.resolved.dump())},
                   {"seed", s.seed},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"files", files}};
    out.write("run_manifest.json", rm.manifest.dump(2) + "\n");
    rm.files.push_back("run_manifest.json");
    return rm;
}

} // namespace gqlab
