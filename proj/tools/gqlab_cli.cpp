// gqlab command line: describe, strata, gram, density, unitarity, consistency, run, validate.
// Exit codes: 0 success, 2 config error, 3 numerical failure.

#include <gqlab/scenario.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

struct Flags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string only;
    std::string k;
};

std::vector<int> parse_k_list(const std::string& text) {
    std::vector<int> ks;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            int k = std::stoi(item, &used);
            if (used != item.size() || k < 1) throw std::invalid_argument(item);
            ks.push_back(k);
        } catch (const std::exception&) {
            throw gqlab::ConfigError("--k: cannot parse '" + item + "'");
        }
    }
    if (ks.empty()) throw gqlab::ConfigError("--k: empty list");
    for (std::size_t i = 1; i < ks.size(); ++i)
        if (ks[i] <= ks[i - 1]) throw gqlab::ConfigError("--k: must be strictly increasing");
    return ks;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw gqlab::ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Applies command-line overrides by editing the config text, so validation sees the final values.
gqlab::Scenario resolve(const Flags& f, const std::string& fixed_only) {
    using gqlab::json;
    json j;
    try {
        j = json::parse(read_file(f.config));
    } catch (const json::parse_error& e) {
        throw gqlab::ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (f.seed) j["seed"] = *f.seed;
    if (!f.out.empty()) j["output_dir"] = f.out;
    if (!f.k.empty()) j["k_list"] = parse_k_list(f.k);
    auto v = gqlab::validate(j.dump());
    if (!v.scenario) {
        std::string msg = "invalid config:";
        for (const auto& e : v.errors) msg += "\n  " + e;
        throw gqlab::ConfigError(msg);
    }
    auto s = *v.scenario;
    std::string only = fixed_only.empty() ? f.only : fixed_only;
    if (!only.empty()) {
        std::vector<std::string> errs;
        s.only = gqlab::detail::parse_only(only, errs, "--only");
        if (!errs.empty()) throw gqlab::ConfigError(errs.front());
    }
    return s;
}

void add_common(CLI::App* app, Flags& f, bool with_only) {
    app->add_option("--config", f.config, "scenario JSON file")->required();
    app->add_option("--out", f.out, "output directory (overrides output_dir)");
    app->add_option("--seed", f.seed, "random seed (overrides seed)");
    if (with_only) app->add_option("--only", f.only, "comma list: strata,gram,density,unitarity,consistency");
    app->add_option("--k", f.k, "comma list of tensor powers (overrides k_list)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"gqlab: quantization and reduction numerics on products of projective spaces"};
    app.require_subcommand(1);
    Flags f;
    std::map<std::string, CLI::App*> subs;
    subs["describe"] = app.add_subcommand("describe", "summary of spaces, strata and predicted limits");
    subs["validate"] = app.add_subcommand("validate", "check a config and list every problem");
    subs["strata"] = app.add_subcommand("strata", "stratification report");
    subs["gram"] = app.add_subcommand("gram", "upstairs and downstairs Gram matrices");
    subs["density"] = app.add_subcommand("density", "density and residual curves");
    subs["unitarity"] = app.add_subcommand("unitarity", "unitarity defects");
    subs["consistency"] = app.add_subcommand("consistency", "stratum-wise norm decomposition check");
    subs["run"] = app.add_subcommand("run", "everything");
    for (auto& [name, sub] : subs) add_common(sub, f, name == "run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (subs["validate"]->parsed()) {
            auto v = gqlab::validate(read_file(f.config));
            if (v.scenario) {
                std::cout << "valid\n" << v.scenario->resolved.dump(2) << "\n";
                return 0;
            }
            for (const auto& e : v.errors) std::cerr << "error: " << e << "\n";
            return 2;
        }
        if (subs["describe"]->parsed()) {
            std::cout << gqlab::describe(resolve(f, "all"));
            return 0;
        }
        std::string only;
        for (const char* q : {"strata", "gram", "density", "unitarity", "consistency"})
            if (subs[q]->parsed()) only = q;
        auto s = resolve(f, only);
        auto rm = gqlab::run(s, &std::cerr);
        for (const auto& file : rm.files) std::cout << (std::filesystem::path(s.output_dir) / file).string() << "\n";
        return 0;
    } catch (const gqlab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const gqlab::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
}
