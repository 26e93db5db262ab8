#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hamlab/harness.hpp"

using namespace hamlab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

harness::ExperimentConfig make_config(std::vector<std::string> args) {
    std::vector<char*> argv;
    static std::vector<std::string> keep;
    keep = std::move(args);
    for (auto& s : keep) argv.push_back(s.data());
    return harness::parse_args(static_cast<int>(argv.size()), argv.data());
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("argument schema", "[harness]") {
    CHECK_THROWS_AS(make_config({"hamlab"}), harness::ConfigError);
    CHECK_THROWS_AS(make_config({"hamlab", "frobnicate"}), harness::ConfigError);
    CHECK_THROWS_AS(make_config({"hamlab", "modulus", "--bogus", "1"}), harness::ConfigError);
    CHECK_THROWS_AS(make_config({"hamlab", "modulus", "--tol"}), harness::ConfigError);

    try {
        make_config({"hamlab", "modulus", "--bogus", "1"});
        FAIL("expected ConfigError");
    } catch (const harness::ConfigError& e) {
        CHECK(std::string(e.what()).find("bogus") != std::string::npos);
    }

    const auto cfg = make_config({"hamlab", "modulus", "--seed", "7", "--shards", "2"});
    CHECK(cfg.seed == 7);
    CHECK(cfg.shards == 2);
    CHECK(cfg.params.at("phi") == "logpow(2)");  // default resolved
    CHECK(cfg.params.at("tol") == "0.001");
    CHECK(cfg.params.at("lambdas") == "0.5,2");
}

TEST_CASE("modulus run emits manifest, summary and ladder", "[harness]") {
    TempDir tmp("hamlab_harness_modulus");
    auto cfg = make_config({"hamlab", "modulus", "--out", tmp.path.string()});
    std::ostringstream log;
    const int rc = harness::run(cfg, log);
    CHECK(rc == 0);
    CHECK(fs::exists(tmp.path / "manifest.json"));
    CHECK(fs::exists(tmp.path / "summary.txt"));
    CHECK(fs::exists(tmp.path / "dini_ladder.csv"));

    const auto manifest = nlohmann::json::parse(slurp(tmp.path / "manifest.json"));
    CHECK(manifest["subcommand"] == "modulus");
    CHECK(manifest["params"]["phi"] == "logpow(2)");
    CHECK(manifest["params"]["tol"] == "0.001");
    CHECK(manifest["seed"] == 0);

    const auto summary = slurp(tmp.path / "summary.txt");
    CHECK(summary.find("PASS") != std::string::npos);
    CHECK(summary.find("FAIL") == std::string::npos);
}

TEST_CASE("bad parameter values fail before artifacts are written", "[harness]") {
    TempDir tmp("hamlab_harness_badval");
    auto cfg = make_config({"hamlab", "modulus", "--tol", "abc", "--out", tmp.path.string()});
    std::ostringstream log;
    CHECK_THROWS_AS(harness::run(cfg, log), harness::ConfigError);
    CHECK_FALSE(fs::exists(tmp.path / "manifest.json"));
    CHECK_FALSE(fs::exists(tmp.path / "dini_ladder.csv"));

    auto cfg2 = make_config({"hamlab", "heat", "--f", "wiggle", "--out", tmp.path.string()});
    CHECK_THROWS_AS(harness::run(cfg2, log), harness::ConfigError);
    CHECK_FALSE(fs::exists(tmp.path / "manifest.json"));
}

TEST_CASE("resolvent subcommand exponential oracle", "[harness]") {
    TempDir tmp("hamlab_harness_resolvent");
    auto cfg = make_config({"hamlab", "resolvent", "--n", "1024", "--out", tmp.path.string()});
    std::ostringstream log;
    CHECK(harness::run(cfg, log) == 0);
    std::ifstream in(tmp.path / "resolvent.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,a1,a,ratio");
}

TEST_CASE("identical configs produce byte-identical artifacts", "[harness]") {
    TempDir a("hamlab_harness_det_a"), b("hamlab_harness_det_b");
    std::ostringstream log;
    auto cfg_a = make_config({"hamlab", "linear", "--probe", "covariance", "--seed", "5", "--out",
                              a.path.string()});
    auto cfg_b = make_config({"hamlab", "linear", "--probe", "covariance", "--seed", "5", "--out",
                              b.path.string()});
    CHECK(harness::run(cfg_a, log) == 0);
    CHECK(harness::run(cfg_b, log) == 0);
    CHECK(slurp(a.path / "covariance.csv") == slurp(b.path / "covariance.csv"));
    CHECK(slurp(a.path / "summary.txt") == slurp(b.path / "summary.txt"));

    // shard count must not change the numbers either
    TempDir c("hamlab_harness_det_c");
    auto cfg_c = make_config({"hamlab", "linear", "--probe", "nullshift", "--seed", "5", "--shards",
                              "3", "--out", c.path.string()});
    TempDir d("hamlab_harness_det_d");
    auto cfg_d = make_config({"hamlab", "linear", "--probe", "nullshift", "--seed", "5", "--shards",
                              "1", "--out", d.path.string()});
    CHECK(harness::run(cfg_c, log) == 0);
    CHECK(harness::run(cfg_d, log) == 0);
    CHECK(slurp(c.path / "nullshift.csv") == slurp(d.path / "nullshift.csv"));
}

TEST_CASE("heat subcommand flags the discontinuous input", "[harness]") {
    TempDir tmp("hamlab_harness_heat");
    auto cfg = make_config({"hamlab", "heat", "--f", "sign", "--n", "1025", "--out",
                            tmp.path.string()});
    std::ostringstream log;
    CHECK(harness::run(cfg, log) == 0);
    const auto summary = slurp(tmp.path / "summary.txt");
    CHECK(summary.find("PASS divergence_detected") != std::string::npos);
}

TEST_CASE("tightening the acceptance tolerance produces controlled failures", "[harness]") {
    TempDir tmp("hamlab_acceptance_sensitivity");
    const auto nominal = acceptance::detail::kolmogorov_covariance(3, tmp.path.string(), 0, 1.0);
    CHECK(nominal.first);
    const auto tightened = acceptance::detail::kolmogorov_covariance(3, tmp.path.string(), 0, 0.01);
    CHECK_FALSE(tightened.first);
}

TEST_CASE("stability subcommand writes the documented csv layout", "[harness]") {
    TempDir tmp("hamlab_harness_stability");
    auto cfg = make_config({"hamlab", "stability", "--n", "200", "--kmax", "4", "--out",
                            tmp.path.string()});
    std::ostringstream log;
    harness::run(cfg, log);
    std::ifstream in(tmp.path / "stability.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "k_or_h,estimate,stderr,flag_rate");
}
