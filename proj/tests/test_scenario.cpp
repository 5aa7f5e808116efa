#include "examples.hpp"

#include <gqlab/scenario.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace gqtest;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string config(const std::string& name) { return slurp(fs::path(GQLAB_CONFIGS) / (name + ".json")); }

fs::path scratch(const std::string& tag) {
    auto p = fs::temp_directory_path() / ("gqlab_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Scenario small_e1(const fs::path& out) {
    auto v = validate(config("e1"));
    Scenario s = *v.scenario;
    s.k_list = {2, 4};
    s.samples = 4000;
    s.output_dir = out.string();
    return s;
}

bool has_error(const Validation& v, const std::string& needle) {
    for (const auto& e : v.errors)
        if (e.find(needle) != std::string::npos) return true;
    return false;
}

int cli(const std::string& args) {
    int rc = std::system((std::string(GQLAB_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST(Scenario, ShippedConfigsValidate) {
    for (const char* n : {"e1", "e2", "e3", "e3_shifted"}) {
        auto v = validate(config(n));
        EXPECT_TRUE(v.scenario.has_value()) << n;
        EXPECT_TRUE(v.errors.empty()) << n;
    }
}

TEST(Scenario, ValidationErrors) {
    auto j = json::parse(config("e1"));
    j["model"] = {{"factors", {2}}, {"bundle_degrees", {1}}};
    j["action"] = {{"rank", 1}, {"weights", {{1, -1, 0}}}, {"shift", {"0"}}};
    j["twist"] = "halfform";
    auto v = validate(j.dump());
    EXPECT_FALSE(v.scenario);
    EXPECT_TRUE(has_error(v, "metaplectic parity"));

    auto l = json::parse(config("e3"));
    l["action"]["shift"] = {"1/3"};
    l["k_list"] = {2};
    EXPECT_TRUE(has_error(validate(l.dump()), "lift integrality"));

    auto e = json::parse(config("e1"));
    e["k_list"] = json::array();
    EXPECT_TRUE(has_error(validate(e.dump()), "k_list"));

    // every problem is listed, not just the first
    auto m = json::parse(config("e1"));
    m["k_list"] = json::array();
    m["norm_defs"] = {3};
    m["quadrature"]["samples"] = -5;
    EXPECT_GE(validate(m.dump()).errors.size(), 3u);

    EXPECT_FALSE(validate("{not json").errors.empty());
}

TEST(Scenario, DescribeE1) {
    auto s = *validate(config("e1")).scenario;
    s.k_list = {2};
    auto d = describe(s);
    EXPECT_NE(d.find("dim H^G = 1"), std::string::npos) << d;
    EXPECT_NE(d.find("isotropy finite Z2"), std::string::npos) << d;
    EXPECT_NE(d.find("M0 = point"), std::string::npos) << d;
    s.k_list = {3};
    EXPECT_NE(describe(s).find("warning: no invariant sections at k=3"), std::string::npos);
}

TEST(Scenario, DescribeE2) {
    auto s = *validate(config("e2")).scenario;
    auto d = describe(s);
    EXPECT_NE(d.find("strata: 3"), std::string::npos) << d;
    EXPECT_NE(d.find("dim_S=1"), std::string::npos);
    EXPECT_NE(d.find("dim_S=0"), std::string::npos);
}

TEST(Scenario, RunWritesDeterministicOutputs) {
    auto out1 = scratch("a"), out2 = scratch("b");
    auto rm = run(small_e1(out1));
    run(small_e1(out2));
    for (const char* f : {"strata.json", "gram_up_2.json", "gram_down_2.json", "gram_up_4.json", "curves.csv",
                          "defects.csv", "consistency.json", "run_manifest.json"}) {
        ASSERT_TRUE(fs::exists(out1 / f)) << f;
        EXPECT_EQ(slurp(out1 / f), slurp(out2 / f)) << f;
    }
    EXPECT_EQ(slurp(out1 / "curves.csv").rfind("quantity,stratum,k,value,stderr\n", 0), 0u);

    // manifest hashes match the bytes on disk
    auto man = json::parse(slurp(out1 / "run_manifest.json"));
    EXPECT_EQ(man["config_sha256"].get<std::string>().size(), 64u);
    for (const auto& f : man["files"])
        EXPECT_EQ(f["sha256"].get<std::string>(), sha256_hex(slurp(out1 / f["name"].get<std::string>())));
    EXPECT_EQ(rm.files.back(), "run_manifest.json");

    // a different seed changes the sampled quantities
    auto out3 = scratch("c");
    auto s3 = small_e1(out3);
    s3.seed = 99;
    run(s3);
    EXPECT_NE(slurp(out1 / "consistency.json"), slurp(out3 / "consistency.json"));
    for (const auto& p : {out1, out2, out3}) fs::remove_all(p);
}

TEST(Scenario, HalfformDefectRowsForE1) {
    auto out = scratch("d");
    auto s = small_e1(out);
    s.k_list = {2, 3};
    run(s);
    std::istringstream in(slurp(out / "curves.csv"));
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.rfind("defect_B", 0) != 0) continue;
        ++rows;
        auto c = line.rfind(','), b = line.rfind(',', c - 1);
        double v = std::stod(line.substr(b + 1, c - b - 1));
        EXPECT_TRUE(std::isfinite(v)) << line;
    }
    EXPECT_GT(rows, 0);
    fs::remove_all(out);
}

TEST(Scenario, OnlySelectsOutputs) {
    auto out = scratch("e");
    auto s = small_e1(out);
    s.only = Quantities{};
    s.only.gram = s.only.density = s.only.unitarity = s.only.consistency = false;
    auto rm = run(s);
    EXPECT_TRUE(fs::exists(out / "strata.json"));
    EXPECT_FALSE(fs::exists(out / "curves.csv"));
    EXPECT_FALSE(fs::exists(out / "gram_up_2.json"));
    EXPECT_EQ(rm.files.size(), 2u);
    fs::remove_all(out);
}

TEST(Scenario, CliExitCodes) {
    const std::string e1 = (fs::path(GQLAB_CONFIGS) / "e1.json").string();
    auto out = scratch("f");
    EXPECT_EQ(cli("validate --config " + e1), 0);
    EXPECT_EQ(cli("describe --config " + e1), 0);
    EXPECT_EQ(cli("strata --config " + e1 + " --out " + out.string()), 0);
    EXPECT_TRUE(fs::exists(out / "strata.json"));
    EXPECT_FALSE(fs::exists(out / "curves.csv"));

    std::ofstream(out / "bad.json") << "{\"k_list\": []}";
    EXPECT_EQ(cli("validate --config " + (out / "bad.json").string()), 2);
    EXPECT_EQ(cli("run --config " + (out / "bad.json").string()), 2);
    EXPECT_EQ(cli("run --config " + (out / "missing.json").string()), 2);
    EXPECT_EQ(cli("describe --config " + e1 + " --bogus"), 2);
    EXPECT_EQ(cli("describe --config " + e1 + " --k 2,x"), 2);
    fs::remove_all(out);
}
