#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "hamlab/acceptance.hpp"
#include "hamlab/csv.hpp"
#include "hamlab/heat_probe.hpp"
#include "hamlab/linear_flow.hpp"
#include "hamlab/modulus.hpp"
#include "hamlab/sde_lab.hpp"
#include "hamlab/volterra.hpp"
#include "hamlab/zvonkin.hpp"

namespace hamlab::harness {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParamDef {
    std::string key;
    std::string def;
    std::string help;
};

struct ExperimentConfig {
    std::string subcommand;
    uint64_t seed = 0;
    unsigned shards = 1;
    std::string out_dir;
    std::map<std::string, std::string> params;  // fully resolved, defaults included
};

inline const std::map<std::string, std::vector<ParamDef>>& schema() {
    static const std::map<std::string, std::vector<ParamDef>> s = {
        {"modulus",
         {{"phi", "logpow(2)", "modulus expression"},
          {"tol", "0.001", "Cauchy tolerance for the Dini ladder"},
          {"lambdas", "0.5,2", "slow-variation probe factors"}}},
        {"resolvent",
         {{"phi", "pow(1)", "Dini kernel modulus"},
          {"T", "1", "horizon"},
          {"n", "4096", "grid steps"}}},
        {"linear",
         {{"probe", "scaling", "scaling | covariance | nullshift | bismut"},
          {"n", "100000", "Monte Carlo samples"},
          {"t", "1", "flow horizon"}}},
        {"heat",
         {{"probe", "modulus", "modulus | commutator"},
          {"f", "sqrtabs", "sqrtabs | sign | linear"},
          {"n", "2049", "grid points"},
          {"L", "2", "half-width of the box"}}},
        {"sde",
         {{"probe", "gap", "gap | lyapunov | moments"},
          {"preset", "example_1_1", "example_1_1 | linear"},
          {"alpha", "1", "example_1_1 Hoelder exponent"},
          {"c1", "1", "example_1_1 c1"},
          {"c2", "0", "example_1_1 c2"},
          {"m", "1", "example_1_1 polynomial order"},
          {"T", "1", "horizon"},
          {"h", "0.0009765625", "Euler step"},
          {"n", "4000", "Monte Carlo samples"}}},
        {"stability",
         {{"kmin", "1", "first regularization level"},
          {"kmax", "8", "last regularization level"},
          {"eps", "0.02", "exceedance threshold"},
          {"n", "2000", "paths"},
          {"T", "1", "horizon"},
          {"h", "0.001953125", "Euler step"}}},
        {"zvonkin",
         {{"probe", "sweep", "sweep | demo"},
          {"lambdas", "1,4,16,64", "resolvent parameters"},
          {"T", "0.5", "horizon"},
          {"nx", "33", "grid nodes per axis"},
          {"L", "2", "hull half-width"},
          {"n", "512", "paths per node"},
          {"h", "0.015625", "Euler step"}}},
        {"acceptance", {{"determinism", "1", "re-run the suite and byte-compare CSVs"}}},
    };
    return s;
}

inline void usage(std::ostream& os) {
    os << "usage: hamlab <subcommand> [--key value]... [--seed N] [--shards N] [--out DIR]\n"
       << "subcommands:\n";
    for (const auto& [name, params] : schema()) {
        os << "  " << name << "\n";
        for (const auto& p : params) os << "      --" << p.key << " (default " << p.def << "): " << p.help << "\n";
    }
}

inline ExperimentConfig parse_args(int argc, char** argv) {
    if (argc < 2) throw ConfigError("missing subcommand");
    ExperimentConfig cfg;
    cfg.subcommand = argv[1];
    const auto it = schema().find(cfg.subcommand);
    if (it == schema().end()) throw ConfigError("unknown subcommand '" + cfg.subcommand + "'");
    for (const auto& p : it->second) cfg.params[p.key] = p.def;
    cfg.out_dir = "out/" + cfg.subcommand;

    for (int i = 2; i < argc; ++i) {
        std::string key = argv[i];
        if (key.rfind("--", 0) != 0) throw ConfigError("expected --key, got '" + key + "'");
        key = key.substr(2);
        if (i + 1 >= argc) throw ConfigError("missing value for --" + key);
        const std::string value = argv[++i];
        if (key == "seed") {
            try {
                cfg.seed = std::stoull(value);
            } catch (...) {
                throw ConfigError("bad value for --seed: '" + value + "'");
            }
        } else if (key == "shards") {
            try {
                cfg.shards = static_cast<unsigned>(std::stoul(value));
            } catch (...) {
                throw ConfigError("bad value for --shards: '" + value + "'");
            }
            if (cfg.shards < 1) throw ConfigError("--shards must be >= 1");
        } else if (key == "out") {
            cfg.out_dir = value;
        } else if (cfg.params.count(key)) {
            cfg.params[key] = value;
        } else {
            throw ConfigError("unknown key --" + key + " for subcommand '" + cfg.subcommand + "'");
        }
    }
    return cfg;
}

namespace detail {

inline linear_flow::PhaseVector pv1(double a, double b) {
    return {Vec::Constant(1, a), Vec::Constant(1, b)};
}

inline double p_num(const ExperimentConfig& cfg, const std::string& key) {
    const std::string& v = cfg.params.at(key);
    size_t used = 0;
    double out = 0;
    try {
        out = std::stod(v, &used);
    } catch (...) {
        throw ConfigError("bad numeric value for --" + key + ": '" + v + "'");
    }
    if (used != v.size()) throw ConfigError("bad numeric value for --" + key + ": '" + v + "'");
    return out;
}

inline long p_int(const ExperimentConfig& cfg, const std::string& key) {
    const double v = p_num(cfg, key);
    if (v != std::floor(v)) throw ConfigError("--" + key + " must be an integer");
    return static_cast<long>(v);
}

inline std::vector<double> p_list(const ExperimentConfig& cfg, const std::string& key) {
    std::vector<double> out;
    const std::string& v = cfg.params.at(key);
    size_t start = 0;
    while (start <= v.size()) {
        const size_t comma = v.find(',', start);
        const std::string item = v.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        try {
            out.push_back(std::stod(item));
        } catch (...) {
            throw ConfigError("bad list value for --" + key + ": '" + v + "'");
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

inline modulus::ModulusFn p_modulus(const ExperimentConfig& cfg, const std::string& key) {
    try {
        return modulus::ModulusFn::parse(cfg.params.at(key));
    } catch (const std::exception& e) {
        throw ConfigError("bad modulus for --" + key + ": " + e.what());
    }
}

struct CheckList {
    std::vector<std::tuple<std::string, bool, std::string>> checks;
    void add(const std::string& name, bool pass, const std::string& detail) {
        checks.emplace_back(name, pass, detail);
    }
    bool all_pass() const {
        for (const auto& [n, p, d] : checks)
            if (!p) return false;
        return true;
    }
};

inline void write_manifest(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    j["subcommand"] = cfg.subcommand;
    j["seed"] = cfg.seed;
    j["shards"] = cfg.shards;
    j["out"] = cfg.out_dir;
    nlohmann::ordered_json params;
    for (const auto& [k, v] : cfg.params) params[k] = v;  // std::map: stable key order
    j["params"] = params;
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream f(cfg.out_dir + "/manifest.json");
    f << j.dump(2) << '\n';
}

inline void write_summary(const ExperimentConfig& cfg, const CheckList& checks) {
    std::ofstream f(cfg.out_dir + "/summary.txt");
    for (const auto& [name, pass, detail] : checks.checks)
        f << (pass ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
}

// ---- subcommand bodies -----------------------------------------------------

inline CheckList run_modulus(const ExperimentConfig& cfg) {
    const auto phi = p_modulus(cfg, "phi");
    const double tol = p_num(cfg, "tol");
    const auto lambdas = p_list(cfg, "lambdas");
    const auto dini = modulus::dini_integral(phi, tol);
    const double defect = modulus::slow_variation_defect(phi, lambdas);

    CheckList checks;
    csv::Writer w(cfg.out_dir + "/dini_ladder.csv", {"rung", "eps", "increment", "partial"});
    double partial = 0.0;
    for (size_t k = 0; k < dini.increments.size(); ++k) {
        partial += dini.increments[k];
        w.row({static_cast<double>(k + 1), std::ldexp(1.0, -static_cast<int>(k + 1)),
               dini.increments[k], partial});
    }
    csv::Writer w2(cfg.out_dir + "/report.csv", {"phi", "verdict", "value", "slow_variation_defect"});
    const std::string verdict = dini.verdict == modulus::Verdict::Converges    ? "converges"
                                : dini.verdict == modulus::Verdict::Diverges   ? "diverges"
                                                                               : "inconclusive";
    w2.row({phi.to_string(), verdict, format_double(dini.value), format_double(defect)});
    checks.add("eval_positive", phi(0.5) > 0 && phi(1.0) > 0, "phi positive on probes");
    checks.add("classification_conclusive", dini.verdict != modulus::Verdict::Inconclusive,
               "verdict " + verdict);
    return checks;
}

inline CheckList run_resolvent(const ExperimentConfig& cfg) {
    const auto phi = p_modulus(cfg, "phi");
    const double T = p_num(cfg, "T");
    const int n = static_cast<int>(p_int(cfg, "n"));
    const auto kg = volterra::resolvent(phi, T, n);
    volterra::write_csv(kg, cfg.out_dir + "/resolvent.csv");

    CheckList checks;
    const double a1_l1 = kg.h * kg.a1.sum();
    const double bound = 10.0 * kg.h * a1_l1 * a1_l1;
    checks.add("renewal_identity", kg.renewal_residual <= bound,
               "residual " + format_double(kg.renewal_residual) + " <= " + format_double(bound));
    const double c = volterra::check_domination(kg);
    checks.add("domination_finite", std::isfinite(c), "C = " + format_double(c));
    if (cfg.params.at("phi") == "pow(1)" && T == 1.0) {
        const int nl = kg.n_steps - 1;
        const double a1v = kg.resolvent(nl) + 0.5 * (kg.resolvent(nl) - kg.resolvent(nl - 1));
        checks.add("exponential_oracle", std::abs(a1v - std::exp(1.0)) < 1e-5,
                   "a(1) = " + format_double(a1v));
    }
    return checks;
}

inline CheckList run_linear(const ExperimentConfig& cfg) {
    const std::string probe = cfg.params.at("probe");
    const std::size_t n = static_cast<std::size_t>(p_int(cfg, "n"));
    const double t = p_num(cfg, "t");
    CheckList checks;
    using linear_flow::McConfig;
    using linear_flow::PhaseVector;
    if (probe == "scaling") {
        std::vector<double> deltas;
        for (int k = 3; k <= 10; ++k) deltas.push_back(std::ldexp(1.0, -k));
        McConfig mc{cfg.seed, n, cfg.shards, 1};
        const auto p1 =
            linear_flow::moment_scaling_probe(Mat::Identity(1, 1), Mat::Identity(1, 1), 1, 2.0, deltas, mc);
        const auto p2 =
            linear_flow::moment_scaling_probe(Mat::Identity(1, 1), Mat::Identity(1, 1), 2, 2.0, deltas, mc);
        csv::Writer w(cfg.out_dir + "/scaling.csv", {"delta", "moment_p", "estimate", "stderr"});
        for (const auto& r : p1.rows) w.row({r.delta, 2.0, r.estimate, r.se});
        for (const auto& r : p2.rows) w.row({r.delta, 2.0, r.estimate, r.se});
        checks.add("x1_slope", std::abs(p1.fit.slope - 1.5) <= 0.05, "slope " + format_double(p1.fit.slope));
        checks.add("x2_slope", std::abs(p2.fit.slope - 0.5) <= 0.05, "slope " + format_double(p2.fit.slope));
    } else if (probe == "covariance") {
        const auto path =
            linear_flow::TimeMatrixPath::constant(Mat::Identity(1, 1), Mat::Identity(1, 1), 0.0, t);
        const auto law = linear_flow::state_law(path, 0.0, t, PhaseVector::zero(1, 1));
        Mat exact(2, 2);
        exact << t * t * t / 3.0, t * t / 2.0, t * t / 2.0, t;
        csv::Writer w(cfg.out_dir + "/covariance.csv", {"i", "j", "exact", "assembled"});
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                w.row({static_cast<double>(i), static_cast<double>(j), exact(i, j), law.cov(i, j)});
        checks.add("covariance_exact", (law.cov - exact).cwiseAbs().maxCoeff() <= 1e-12,
                   "max entry error " + format_double((law.cov - exact).cwiseAbs().maxCoeff()));
    } else if (probe == "nullshift") {
        double worst = 0.0;
        rng::NormalStream st(cfg.seed, rng::Purpose::generic, 3);
        for (int rep = 0; rep < 100; ++rep) {
            const auto path = linear_flow::make_random_path(cfg.seed + rep, 3, 1, 1, 0.0, t);
            const auto [r1, r2] = linear_flow::null_shift_check(
                path, 0.0, t, PhaseVector{Vec::Constant(1, st.next()), Vec::Constant(1, st.next())});
            worst = std::max(worst, std::max(r1, r2));
        }
        csv::Writer w(cfg.out_dir + "/nullshift.csv", {"max_residual"});
        w.row({worst});
        checks.add("null_shift", worst < 1e-9, "max residual " + format_double(worst));
    } else if (probe == "bismut") {
        const auto path =
            linear_flow::TimeMatrixPath::constant(Mat::Identity(1, 1), Mat::Identity(1, 1), 0.0, t);
        auto f = [](const PhaseVector& x) { return std::cos(x.x1(0) + x.x2(0)); };
        McConfig mc{cfg.seed, n, cfg.shards, 5};
        PhaseVector h{Vec::Constant(1, 0.3), Vec::Constant(1, 1.0)};
        const auto b = linear_flow::bismut_derivative(path, 0.0, t, PhaseVector::zero(1, 1), f, {h}, mc);
        const auto fd = linear_flow::fd_derivative(path, 0.0, t, PhaseVector::zero(1, 1), f, h, 0.05, mc);
        csv::Writer w(cfg.out_dir + "/bismut.csv", {"bismut", "bismut_se", "fd", "fd_se"});
        w.row({b.value, b.se, fd.value, fd.se});
        const double comb = std::sqrt(b.se * b.se + fd.se * fd.se);
        checks.add("bismut_fd_agree", std::abs(b.value - fd.value) <= 4.0 * comb,
                   "diff " + format_double(std::abs(b.value - fd.value)));
    } else {
        throw ConfigError("unknown value for --probe: '" + probe + "'");
    }
    return checks;
}

inline CheckList run_heat(const ExperimentConfig& cfg) {
    const std::string probe = cfg.params.at("probe");
    const std::string fname = cfg.params.at("f");
    const int n = static_cast<int>(p_int(cfg, "n"));
    const double L = p_num(cfg, "L");
    std::function<double(double)> fx;
    if (fname == "sqrtabs")
        fx = [](double x) { return std::min(std::sqrt(std::abs(x)), 1.0); };
    else if (fname == "sign")
        fx = [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); };
    else if (fname == "linear")
        fx = [](double x) { return x; };
    else
        throw ConfigError("unknown value for --f: '" + fname + "'");
    const auto f = heat_probe::GridFunction::sample_1d(n, L, fx);

    CheckList checks;
    if (probe == "modulus") {
        const auto psi = modulus::ModulusFn::power(0.5);
        std::vector<double> thetas;
        for (int k = 2; k <= 14; ++k) thetas.push_back(std::ldexp(1.0, -k));
        const auto est = heat_probe::modulus_estimate(f, psi, thetas);
        csv::Writer w(cfg.out_dir + "/modulus_ladder.csv", {"theta", "term"});
        for (const auto& [th, term] : est.ladder) w.row({th, term});
        if (fname == "sqrtabs") {
            const double ratio = est.value / (heat_probe::seminorm(f, psi) + f.sup_norm());
            checks.add("two_sided_band", ratio >= 0.1 && ratio <= 10.0, "ratio " + format_double(ratio));
            checks.add("not_divergent", !est.divergent, "ladder bounded");
        } else if (fname == "sign") {
            checks.add("divergence_detected", est.divergent, "ladder grows as theta -> 0");
        } else {
            checks.add("heat_invariant", est.sup_term < 1e-6, "sup term " + format_double(est.sup_term));
        }
    } else if (probe == "commutator") {
        const auto g = heat_probe::GridFunction::sample_1d(n, L, [](double x) { return std::cos(x); });
        const auto psi = modulus::ModulusFn::power(0.25);
        const auto phim = modulus::ModulusFn::power(0.25);
        std::vector<double> thetas;
        for (int k = 2; k <= 8; ++k) thetas.push_back(std::ldexp(1.0, -k));
        const auto ladder = heat_probe::commutator_ladder(f, g, thetas, psi, phim);
        csv::Writer w(cfg.out_dir + "/commutator_ladder.csv", {"theta", "implied_c"});
        std::vector<double> cs;
        for (const auto& [th, c] : ladder) {
            w.row({th, c});
            cs.push_back(c);
        }
        std::sort(cs.begin(), cs.end());
        const double median = cs[cs.size() / 2];
        checks.add("ladder_bounded", cs.back() <= 3.0 * median && cs.front() >= median / 3.0,
                   "range [" + format_double(cs.front()) + ", " + format_double(cs.back()) + "]");
    } else {
        throw ConfigError("unknown value for --probe: '" + probe + "'");
    }
    return checks;
}

inline CheckList run_sde(const ExperimentConfig& cfg) {
    const std::string probe = cfg.params.at("probe");
    const std::string preset = cfg.params.at("preset");
    sde_lab::Example11Params p;
    p.alpha = p_num(cfg, "alpha");
    p.c1 = p_num(cfg, "c1");
    p.c2 = p_num(cfg, "c2");
    p.m = static_cast<int>(p_int(cfg, "m"));
    const double T = p_num(cfg, "T");
    const double h = p_num(cfg, "h");
    const std::size_t n = static_cast<std::size_t>(p_int(cfg, "n"));
    sde_lab::SdeModel model;
    if (preset == "example_1_1")
        model = sde_lab::example_1_1(p);
    else if (preset == "linear")
        model = sde_lab::linear(Mat::Identity(1, 1), Mat::Identity(1, 1));
    else
        throw ConfigError("unknown value for --preset: '" + preset + "'");
    if (probe == "lyapunov" && preset != "example_1_1")
        throw ConfigError("--probe lyapunov needs the example_1_1 preset");
    using linear_flow::McConfig;
    using linear_flow::PhaseVector;
    McConfig mc{cfg.seed, n, cfg.shards, 11};
    CheckList checks;

    if (probe == "gap") {
        std::vector<double> hs{h * 8, h * 4, h * 2, h};
        const auto lad = sde_lab::pathwise_gap(model, detail::pv1(0.5, 0.0), T, hs, mc);
        csv::Writer w(cfg.out_dir + "/gap.csv", {"k_or_h", "estimate", "stderr", "flag_rate"});
        for (size_t i = 0; i < lad.h.size(); ++i)
            w.row({lad.h[i], lad.gap[i], lad.se[i], lad.flag_rate[i]});
        bool decreasing = true;
        for (size_t i = 1; i < lad.gap.size(); ++i)
            if (lad.gap[i] >= lad.gap[i - 1]) decreasing = false;
        checks.add("gap_decreasing", decreasing, "fitted order " + format_double(lad.order.slope));
    } else if (probe == "lyapunov") {
        std::vector<PhaseVector> grid;
        for (int i = -10; i <= 10; ++i)
            for (int j = -10; j <= 10; ++j) grid.push_back(detail::pv1(i, j));
        const auto rep = sde_lab::lyapunov_check(model, grid);
        csv::Writer w(cfg.out_dir + "/lyapunov.csv",
                      {"max_generator_ratio", "max_grad_ratio", "delta1", "delta2"});
        w.row({rep.max_generator_ratio, rep.max_grad_ratio, rep.delta1, rep.delta2});
        checks.add("ratios_finite", rep.finite, "generator " + format_double(rep.max_generator_ratio));
        checks.add("grad_ratio_bound", rep.max_grad_ratio <= 2.0 + 1e-12,
                   format_double(rep.max_grad_ratio) + " <= 2");
    } else if (probe == "moments") {
        const auto diag = sde_lab::moment_diag(model, detail::pv1(0.5, 0.0), T, 0.25, mc, h);
        csv::Writer w(cfg.out_dir + "/moments.csv",
                      {"estimate", "stderr", "cap_hit_rate", "q50", "q90", "q99", "flag_rate"});
        w.row({diag.estimate, diag.se, diag.cap_hit_rate, diag.q50, diag.q90, diag.q99, diag.flag_rate});
        checks.add("finite_exponential_moment", std::isfinite(diag.estimate) && diag.cap_hit_rate < 1e-3,
                   "estimate " + format_double(diag.estimate) + ", cap hits " +
                       format_double(diag.cap_hit_rate));
        checks.add("no_blowups", diag.flag_rate == 0.0, "flag rate " + format_double(diag.flag_rate));
    } else {
        throw ConfigError("unknown value for --probe: '" + probe + "'");
    }
    return checks;
}

inline CheckList run_stability(const ExperimentConfig& cfg) {
    const int kmin = static_cast<int>(p_int(cfg, "kmin"));
    const int kmax = static_cast<int>(p_int(cfg, "kmax"));
    if (kmin >= kmax) throw ConfigError("--kmin must be below --kmax");
    const double eps = p_num(cfg, "eps");
    const double T = p_num(cfg, "T");
    const double h = p_num(cfg, "h");
    const std::size_t n = static_cast<std::size_t>(p_int(cfg, "n"));
    std::vector<int> ks;
    for (int k = kmin; k <= kmax; ++k) ks.push_back(k);
    linear_flow::McConfig mc{cfg.seed, n, cfg.shards, 21};
    const auto lad = sde_lab::stability_experiment(
        [](int k) { return sde_lab::holder23_member(k); }, detail::pv1(0.0, 0.0), T, eps, mc, ks, h);
    csv::Writer w(cfg.out_dir + "/stability.csv", {"k_or_h", "estimate", "stderr", "flag_rate"});
    for (size_t i = 0; i < ks.size(); ++i)
        w.row({static_cast<double>(lad.k[i]), lad.p[i], lad.se[i], lad.flag_rate});
    bool monotone = true;
    for (size_t i = 1; i < lad.p.size(); ++i)
        if (lad.p[i] > lad.p[i - 1] + 2.0 * (lad.se[i] + lad.se[i - 1])) monotone = false;
    CheckList checks;
    checks.add("ladder_non_increasing", monotone, "p ranges " + format_double(lad.p.front()) + " -> " +
                                                      format_double(lad.p.back()));
    return checks;
}

inline CheckList run_zvonkin(const ExperimentConfig& cfg) {
    const std::string probe = cfg.params.at("probe");
    const double T = p_num(cfg, "T");
    const double h = p_num(cfg, "h");
    const double L = p_num(cfg, "L");
    const int nx = static_cast<int>(p_int(cfg, "nx"));
    const std::size_t n = static_cast<std::size_t>(p_int(cfg, "n"));
    zvonkin::GridSpec grid;
    grid.lo = Vec::Constant(2, -L);
    grid.hi = Vec::Constant(2, L);
    grid.npts = {nx, nx};
    zvonkin::SolveConfig scfg;
    scfg.h = h;
    scfg.mc = linear_flow::McConfig{cfg.seed, n, cfg.shards, 31};
    CheckList checks;

    if (probe == "sweep") {
        const auto lambdas = p_list(cfg, "lambdas");
        sde_lab::Example11Params p;
        p.alpha = 0.8;
        p.mollify = std::ldexp(1.0, -6);
        const auto model = sde_lab::example_1_1(p);
        const auto sweep = zvonkin::lambda_sweep(model, lambdas, T, grid, {T / 2, T}, scfg);
        csv::Writer w(cfg.out_dir + "/sweep.csv", {"lambda", "contraction", "stderr"});
        for (size_t i = 0; i < lambdas.size(); ++i)
            w.row({sweep.lambdas[i], sweep.contraction[i], sweep.se[i]});
        checks.add("contraction_monotone", sweep.monotone_within_2se,
                   "threshold lambda " + format_double(sweep.threshold_lambda));
    } else if (probe == "demo") {
        const auto model = sde_lab::holder23_member(5);
        auto field = std::make_shared<zvonkin::TransformField>(
            zvonkin::solve_u(model, 16.0, T, grid, {T}, scfg, zvonkin::GradMethod::crn_fd));
        checks.add("contraction_below_half", field->contraction < 0.5,
                   "contraction " + format_double(field->contraction));
        if (field->contraction < 0.5) {
            const auto tr = zvonkin::build_transform(field);
            const auto coeffs = zvonkin::transformed_coeffs(model, tr);
            const int ti = field->time_index(T);
            std::vector<double> scales;
            for (int k = 1; k <= 7; ++k) scales.push_back(std::ldexp(1.0, -k));
            std::vector<Vec> dirs{(Vec(2) << 1.0, 0.0).finished()};
            std::vector<Vec> centers;
            for (double c : {0.0, 0.5, -0.5}) centers.push_back((Vec(2) << 0.0, c).finished());
            auto raw = zvonkin::lipschitz_probe(
                [](const Vec& x) { return Vec::Constant(1, -std::pow(std::abs(x(0)), 2.0 / 3.0)); },
                centers, dirs, scales);
            std::vector<Vec> ycenters;
            for (const auto& c : centers) ycenters.push_back(tr.forward(ti, c));
            auto reg = zvonkin::lipschitz_probe([&](const Vec& y) { return coeffs.g(ti, y); },
                                                ycenters, dirs, scales);
            csv::Writer w(cfg.out_dir + "/demo.csv", {"r", "L_raw", "L_transformed"});
            for (size_t i = 0; i < scales.size(); ++i) w.row({raw.r[i], raw.L[i], reg.L[i]});
            checks.add("raw_slope", std::abs(raw.fit.slope + 1.0 / 3.0) <= 0.07,
                       format_double(raw.fit.slope));
            checks.add("transformed_flat", reg.fit.slope > -0.1, format_double(reg.fit.slope));
            zvonkin::write_field(*field, cfg.out_dir + "/transform_field.txt");
        }
    } else {
        throw ConfigError("unknown value for --probe: '" + probe + "'");
    }
    return checks;
}

inline CheckList run_acceptance(const ExperimentConfig& cfg) {
    const bool det = p_int(cfg, "determinism") != 0;
    const auto results = acceptance::run_all(cfg.seed, cfg.out_dir, cfg.shards, det);
    nlohmann::ordered_json j;
    CheckList checks;
    for (const auto& r : results) {
        nlohmann::ordered_json e;
        e["id"] = r.id;
        e["name"] = r.name;
        e["pass"] = r.pass;
        e["detail"] = r.detail;
        e["seconds"] = r.seconds;
        j.push_back(e);
        checks.add("criterion_" + std::to_string(r.id) + "_" + r.name, r.pass, r.detail);
    }
    std::ofstream f(cfg.out_dir + "/acceptance.json");
    f << j.dump(2) << '\n';
    return checks;
}

}  // namespace detail

// Dispatch; returns the process exit code.
inline int run(const ExperimentConfig& cfg, std::ostream& log) {
    detail::CheckList checks;
    if (cfg.subcommand == "modulus")
        checks = detail::run_modulus(cfg);
    else if (cfg.subcommand == "resolvent")
        checks = detail::run_resolvent(cfg);
    else if (cfg.subcommand == "linear")
        checks = detail::run_linear(cfg);
    else if (cfg.subcommand == "heat")
        checks = detail::run_heat(cfg);
    else if (cfg.subcommand == "sde")
        checks = detail::run_sde(cfg);
    else if (cfg.subcommand == "stability")
        checks = detail::run_stability(cfg);
    else if (cfg.subcommand == "zvonkin")
        checks = detail::run_zvonkin(cfg);
    else if (cfg.subcommand == "acceptance")
        checks = detail::run_acceptance(cfg);
    else
        throw ConfigError("unknown subcommand '" + cfg.subcommand + "'");

    detail::write_manifest(cfg);
    detail::write_summary(cfg, checks);
    for (const auto& [name, pass, d] : checks.checks)
        log << (pass ? "PASS " : "FAIL ") << name << ": " << d << '\n';
    return checks.all_pass() ? 0 : 1;
}

}  // namespace hamlab::harness
