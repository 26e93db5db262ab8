#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hamlab/csv.hpp"
#include "hamlab/heat_probe.hpp"
#include "hamlab/linear_flow.hpp"
#include "hamlab/modulus.hpp"
#include "hamlab/sde_lab.hpp"
#include "hamlab/volterra.hpp"
#include "hamlab/zvonkin.hpp"

namespace hamlab::acceptance {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

template <class Fn>
CriterionResult timed(int id, const std::string& name, Fn fn) {
    CriterionResult r;
    r.id = id;
    r.name = name;
    const auto t0 = Clock::now();
    try {
        auto [pass, msg] = fn();
        r.pass = pass;
        r.detail = msg;
    } catch (const std::exception& e) {
        r.pass = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return r;
}

using linear_flow::McConfig;
using linear_flow::PhaseVector;
using linear_flow::TimeMatrixPath;

inline PhaseVector pv1(double a, double b) {
    Vec x1(1), x2(1);
    x1 << a;
    x2 << b;
    return {x1, x2};
}

// ---- criterion 1: exact Kolmogorov covariance + MC confirmation -------------

// tol_scale != 1 exists to demonstrate sensitivity: shrinking the acceptance
// band must produce controlled failures.
inline std::pair<bool, std::string> kolmogorov_covariance(uint64_t seed, const std::string& dir,
                                                          unsigned threads, double tol_scale = 1.0) {
    const double t = 1.0;
    const auto path = TimeMatrixPath::constant(Mat::Identity(1, 1), Mat::Identity(1, 1), 0.0, t);
    const auto law = linear_flow::state_law(path, 0.0, t, PhaseVector::zero(1, 1));
    Mat exact(2, 2);
    exact << t * t * t / 3.0, t * t / 2.0, t * t / 2.0, t;
    const double asm_err = (law.cov - exact).cwiseAbs().maxCoeff();

    const std::size_t n = 1000000;
    McConfig mc{seed, n, threads, 101};
    auto est = stats::mc_mean_multi(n, 3, threads, [&](std::size_t i, std::vector<double>& out) {
        rng::NormalStream st(linear_flow::derive_seed(mc.seed, mc.stream_salt),
                             rng::Purpose::law_sample, i);
        Vec g(2);
        g << st.next(), st.next();
        const Vec z = law.mean + law.chol() * g;
        out[0] = z(0) * z(0);
        out[1] = z(0) * z(1);
        out[2] = z(1) * z(1);
    });
    // Gaussian moments: se(hat c) via the asymptotic variance of products
    const double se11 = std::sqrt(2.0 * exact(0, 0) * exact(0, 0) / n);
    const double se12 = std::sqrt((exact(0, 0) * exact(1, 1) + exact(0, 1) * exact(0, 1)) / n);
    const double se22 = std::sqrt(2.0 * exact(1, 1) * exact(1, 1) / n);
    const double d11 = std::abs(est[0].value - exact(0, 0));
    const double d12 = std::abs(est[1].value - exact(0, 1));
    const double d22 = std::abs(est[2].value - exact(1, 1));

    csv::Writer w(dir + "/c01_covariance.csv", {"entry", "exact", "assembled", "mc", "mc_se"});
    w.row({"11", format_double(exact(0, 0)), format_double(law.cov(0, 0)),
           format_double(est[0].value), format_double(se11)});
    w.row({"12", format_double(exact(0, 1)), format_double(law.cov(0, 1)),
           format_double(est[1].value), format_double(se12)});
    w.row({"22", format_double(exact(1, 1)), format_double(law.cov(1, 1)),
           format_double(est[2].value), format_double(se22)});

    const double band = 3.0 * tol_scale;
    const bool pass = asm_err <= 1e-12 * tol_scale && d11 <= band * se11 && d12 <= band * se12 &&
                      d22 <= band * se22;
    return {pass, "assembly err " + num(asm_err) + ", MC devs/3se " + num(d11 / (3 * se11)) + "," +
                      num(d12 / (3 * se12)) + "," + num(d22 / (3 * se22))};
}

// ---- criterion 2: Bismut weights vs common-random-number finite differences --

inline std::pair<bool, std::string> bismut_vs_fd(uint64_t seed, const std::string& dir,
                                                 unsigned threads) {
    using linear_flow::ScalarFn;
    std::vector<ScalarFn> fs = {
        [](const PhaseVector& x) { return std::cos(x.x1(0) + x.x2(0)); },
        [](const PhaseVector& x) { return std::sin(x.x1(0)) * std::cos(0.5 * x.x2(0)); },
        [](const PhaseVector& x) { return std::exp(-(x.x1(0) * x.x1(0) + x.x2(0) * x.x2(0)) / 4.0); },
        [](const PhaseVector& x) { return std::tanh(x.x1(0)) * std::sin(0.3 * x.x2(0)); },
        [](const PhaseVector& x) { return 1.0 / (1.0 + x.x1(0) * x.x1(0) + 0.5 * x.x2(0) * x.x2(0)); },
    };
    std::vector<TimeMatrixPath> paths;
    for (int i = 0; i < 3; ++i) paths.push_back(linear_flow::make_random_path(seed + 11 * i, 3, 1, 1, 0.0, 1.0));

    csv::Writer w(dir + "/c02_bismut_fd.csv",
                  {"rep", "f", "path", "order", "bismut", "bismut_se", "fd", "fd_se", "zscore"});
    int within = 0;
    const std::size_t n = 100000;
    rng::NormalStream dirs(seed, rng::Purpose::generic, 42);
    for (int rep = 0; rep < 100; ++rep) {
        const int fi = rep % 5;
        const int pi = (rep / 5) % 3;
        const int order = 1 + (rep / 15) % 2;
        const auto& path = paths[pi];
        const PhaseVector x = pv1(0.2 * dirs.next(), 0.2 * dirs.next());
        std::vector<PhaseVector> hs;
        for (int k = 0; k < order; ++k) hs.push_back(pv1(dirs.next(), dirs.next()));

        McConfig mc{seed, n, threads, 200 + static_cast<uint64_t>(rep)};
        const auto b = linear_flow::bismut_derivative(path, 0.0, 1.0, x, fs[fi], hs, mc);
        stats::Estimate fd;
        if (order == 1)
            fd = linear_flow::fd_derivative(path, 0.0, 1.0, x, fs[fi], hs[0], 0.05, mc);
        else
            fd = linear_flow::fd_second(path, 0.0, 1.0, x, fs[fi], hs[0], hs[1], 0.1, mc);
        const double comb = std::sqrt(b.se * b.se + fd.se * fd.se);
        const double z = std::abs(b.value - fd.value) / std::max(comb, 1e-300);
        if (z <= 3.0) ++within;
        w.row({static_cast<double>(rep), static_cast<double>(fi), static_cast<double>(pi),
               static_cast<double>(order), b.value, b.se, fd.value, fd.se, z});
    }
    return {within >= 95, std::to_string(within) + "/100 comparisons within 3 combined se"};
}

// ---- criterion 3: exact null-shift identities --------------------------------

inline std::pair<bool, std::string> null_shift(uint64_t seed, const std::string& dir) {
    double worst = 0.0;
    rng::NormalStream st(seed, rng::Purpose::generic, 7);
    csv::Writer w(dir + "/c03_null_shift.csv", {"rep", "d1", "d2", "res1", "res2"});
    for (int rep = 0; rep < 1000; ++rep) {
        const int d1 = rep % 5 == 4 ? 2 : 1;
        const int d2 = rep % 5 >= 3 ? 2 : 1;
        if (d1 > d2) continue;
        const auto path = linear_flow::make_random_path(seed + 1000 + rep, 3, d1, d2, 0.0, 1.0);
        PhaseVector h{Vec(d1), Vec(d2)};
        for (int i = 0; i < d1; ++i) h.x1(i) = st.next();
        for (int i = 0; i < d2; ++i) h.x2(i) = st.next();
        const double s = 0.05 + 0.1 * st.next_uniform();
        const double t = 0.95 - 0.1 * st.next_uniform();
        const auto [r1, r2] = linear_flow::null_shift_check(path, s, t, h);
        worst = std::max(worst, std::max(r1, r2));
        if (rep % 100 == 0)
            w.row({static_cast<double>(rep), static_cast<double>(d1), static_cast<double>(d2), r1, r2});
    }
    return {worst < 1e-9, "max residual " + num(worst)};
}

// ---- criterion 4: moment scaling slopes --------------------------------------

inline std::pair<bool, std::string> moment_scalings(uint64_t seed, const std::string& dir,
                                                    unsigned threads) {
    std::vector<double> deltas;
    for (int k = 3; k <= 10; ++k) deltas.push_back(std::ldexp(1.0, -k));
    McConfig mc{seed, 100000, threads, 300};
    const auto p1 = linear_flow::moment_scaling_probe(Mat::Identity(1, 1), Mat::Identity(1, 1), 1,
                                                      2.0, deltas, mc);
    const auto p2 = linear_flow::moment_scaling_probe(Mat::Identity(1, 1), Mat::Identity(1, 1), 2,
                                                      2.0, deltas, mc);
    csv::Writer w(dir + "/c04_moments.csv", {"delta", "block", "norm_p", "se"});
    for (const auto& r : p1.rows) w.row({r.delta, 1.0, r.estimate, r.se});
    for (const auto& r : p2.rows) w.row({r.delta, 2.0, r.estimate, r.se});
    const bool ok1 = std::abs(p1.fit.slope - 1.5) <= 0.05;
    const bool ok2 = std::abs(p2.fit.slope - 0.5) <= 0.05;
    return {ok1 && ok2, "slopes " + num(p1.fit.slope) + " (want 1.5), " + num(p2.fit.slope) +
                            " (want 0.5)"};
}

// ---- criterion 5: Q^{-1} scaling ---------------------------------------------

inline std::pair<bool, std::string> qinv_scaling(const std::string& dir) {
    std::vector<double> lx, ly;
    csv::Writer w(dir + "/c05_qinv.csv", {"delta", "qinv_norm"});
    for (int k = 1; k <= 10; ++k) {
        const double delta = std::ldexp(1.0, -k);
        const auto path = TimeMatrixPath::constant(Mat::Identity(1, 1), Mat::Identity(1, 1), 0.0, delta);
        const Mat q = linear_flow::q_matrix(path, 0.0, delta);
        const double qin = 1.0 / q(0, 0);
        w.row({delta, qin});
        lx.push_back(std::log(delta));
        ly.push_back(std::log(qin));
    }
    const double slope = fit_line(lx, ly).slope;
    return {std::abs(slope + 3.0) <= 0.01, "slope " + num(slope) + " (want -3)"};
}

// ---- criterion 6: resolvent oracle -------------------------------------------

inline std::pair<bool, std::string> resolvent_oracle(const std::string& dir) {
    const auto kg = volterra::resolvent(modulus::ModulusFn::power(1.0), 1.0, 4096);
    volterra::write_csv(kg, dir + "/c06_resolvent_pow1.csv");
    // extrapolate the midpoint samples to t = 1
    const int nl = kg.n_steps - 1;
    const double a1v = kg.resolvent(nl) + 0.5 * (kg.resolvent(nl) - kg.resolvent(nl - 1));
    const double e_err = std::abs(a1v - std::exp(1.0));
    double max_err = 0.0;
    for (int j = 0; j < kg.n_steps; ++j)
        max_err = std::max(max_err, std::abs(kg.resolvent(j) - std::exp(kg.midpoint(j))));
    const double res_bound = 10.0 * kg.h * 1.0;  // ||a1||_L1 = 1 for phi = pow(1)
    const bool renewal_ok = kg.renewal_residual <= res_bound;

    const auto lg1 = volterra::resolvent(modulus::ModulusFn::log_power(2.0), 1.0, 4096);
    const auto lg2 = volterra::resolvent(modulus::ModulusFn::log_power(2.0), 1.0, 8192);
    volterra::write_csv(lg1, dir + "/c06_resolvent_logpow2.csv");
    const double c1 = volterra::check_domination(lg1);
    const double c2 = volterra::check_domination(lg2);
    const double drift = std::abs(c1 - c2) / c2;

    const bool pass = e_err < 1e-5 && max_err < 1e-5 && renewal_ok && std::isfinite(c1) && drift <= 0.10;
    return {pass, "a(1)-e " + num(e_err) + ", sup err " + num(max_err) + ", renewal " +
                      num(kg.renewal_residual) + ", domination " + num(c1) + " drift " + num(drift)};
}

// ---- criterion 7: heat-semigroup modulus characterization ---------------------

inline std::pair<bool, std::string> modulus_characterization(const std::string& dir) {
    const auto psi = modulus::ModulusFn::power(0.5);
    auto clipped_sqrt = [](double x) { return std::min(std::sqrt(std::abs(x)), 1.0); };
    std::vector<double> thetas;
    for (int k = 2; k <= 14; ++k) thetas.push_back(std::ldexp(1.0, -k));

    auto run = [&](int n) {
        const auto f = heat_probe::GridFunction::sample_1d(n, 2.0, clipped_sqrt);
        const auto est = heat_probe::modulus_estimate(f, psi, thetas);
        const double norm_psi = heat_probe::seminorm(f, psi) + f.sup_norm();
        return std::make_tuple(est, norm_psi);
    };
    const auto [est1, norm1] = run(2049);
    const auto [est2, norm2] = run(1025);
    const double ratio1 = est1.value / norm1;
    const double ratio2 = est2.value / norm2;

    csv::Writer w(dir + "/c07_modulus.csv", {"grid_n", "theta", "ladder_term"});
    for (const auto& [th, term] : est1.ladder) w.row({2049.0, th, term});
    for (const auto& [th, term] : est2.ladder) w.row({1025.0, th, term});

    const auto sgn = heat_probe::GridFunction::sample_1d(
        2049, 2.0, [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
    const auto est_sgn = heat_probe::modulus_estimate(sgn, psi, thetas);

    const bool in_band = ratio1 >= 0.1 && ratio1 <= 10.0 && ratio2 >= 0.1 && ratio2 <= 10.0;
    const bool stable = std::abs(std::log(ratio1 / ratio2)) <= std::log(2.0);
    const bool pass = in_band && stable && est_sgn.divergent && !est1.divergent;
    return {pass, "ratios " + num(ratio1) + "/" + num(ratio2) + ", sign divergent " +
                      (est_sgn.divergent ? "yes" : "no")};
}

// ---- criterion 8: commutator implied-constant ladder --------------------------

inline std::pair<bool, std::string> commutator_ladder(const std::string& dir) {
    const auto f = heat_probe::GridFunction::sample_1d(
        2049, 2.0, [](double x) { return std::min(std::sqrt(std::abs(x)), 1.0); });
    const auto g = heat_probe::GridFunction::sample_1d(2049, 2.0, [](double x) { return std::cos(x); });
    const auto psi = modulus::ModulusFn::power(0.25);
    const auto phi = modulus::ModulusFn::power(0.25);
    std::vector<double> thetas;
    for (int k = 2; k <= 8; ++k) thetas.push_back(std::ldexp(1.0, -k));
    const auto ladder = heat_probe::commutator_ladder(f, g, thetas, psi, phi);
    csv::Writer w(dir + "/c08_commutator.csv", {"theta", "implied_c"});
    std::vector<double> cs;
    for (const auto& [th, c] : ladder) {
        w.row({th, c});
        cs.push_back(c);
    }
    std::vector<double> sorted = cs;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    double lo = 1e300, hi = 0.0;
    for (double c : cs) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    const bool pass = hi <= 3.0 * median && lo >= median / 3.0 && cs.size() >= 6;
    return {pass, "C ladder in [" + num(lo) + ", " + num(hi) + "], median " + num(median)};
}

// ---- criterion 9: commutation identities --------------------------------------

inline std::pair<bool, std::string> commutation_identity(uint64_t seed, const std::string& dir,
                                                         unsigned threads) {
    TimeMatrixPath path({0.0, 0.5, 1.0}, {Mat::Identity(1, 1), 1.5 * Mat::Identity(1, 1)},
                        {Mat::Identity(1, 1), 0.8 * Mat::Identity(1, 1)});
    std::vector<linear_flow::TestFunction> suite;
    suite.push_back({[](const PhaseVector& x) { return std::sin(x.x1(0)); },
                     [](const PhaseVector& x) { return Vec::Constant(1, std::cos(x.x1(0))); },
                     [](const PhaseVector&) { return Vec::Zero(1); }});
    suite.push_back({[](const PhaseVector& x) { return std::cos(x.x1(0) + 0.7 * x.x2(0)); },
                     [](const PhaseVector& x) { return Vec::Constant(1, -std::sin(x.x1(0) + 0.7 * x.x2(0))); },
                     [](const PhaseVector& x) { return Vec::Constant(1, -0.7 * std::sin(x.x1(0) + 0.7 * x.x2(0))); }});
    suite.push_back({[](const PhaseVector& x) { return std::tanh(x.x2(0)); },
                     [](const PhaseVector&) { return Vec::Zero(1); },
                     [](const PhaseVector& x) {
                         const double c = std::cosh(x.x2(0));
                         return Vec::Constant(1, 1.0 / (c * c));
                     }});
    csv::Writer w(dir + "/c09_commutation.csv", {"fn", "identity", "component", "residual", "se"});
    bool pass = true;
    std::string detail;
    for (size_t fi = 0; fi < suite.size(); ++fi) {
        McConfig mc{seed, 100000, threads, 400 + fi};
        const auto res =
            linear_flow::commutation_check(path, 0.0, 1.0, pv1(0.3, -0.2), suite[fi], mc);
        for (int c = 0; c < res.res1.size(); ++c) {
            w.row({static_cast<double>(fi), 1.0, static_cast<double>(c), res.res1(c), res.se1(c)});
            if (std::abs(res.res1(c)) > 3.0 * res.se1(c)) pass = false;
        }
        for (int c = 0; c < res.res2.size(); ++c) {
            w.row({static_cast<double>(fi), 2.0, static_cast<double>(c), res.res2(c), res.se2(c)});
            if (std::abs(res.res2(c)) > 3.0 * res.se2(c)) pass = false;
        }
    }
    return {pass, pass ? "all residuals within 3 se" : "a residual exceeded 3 se"};
}

// ---- criterion 10: lambda sweep + analytic envelope ----------------------------

inline std::pair<bool, std::string> lambda_sweep(uint64_t seed, const std::string& dir,
                                                 unsigned threads) {
    sde_lab::Example11Params p;
    p.alpha = 0.8;
    p.c1 = 1.0;
    p.c2 = 0.0;
    p.mollify = std::ldexp(1.0, -6);
    const auto model = sde_lab::example_1_1(p);

    zvonkin::GridSpec grid;
    grid.lo = Vec::Constant(2, -2.0);
    grid.hi = Vec::Constant(2, 2.0);
    grid.npts = {33, 33};
    zvonkin::SolveConfig cfg;
    cfg.h = 1.0 / 64;
    cfg.mc = McConfig{seed, 512, threads, 500};
    const std::vector<double> lambdas{1.0, 4.0, 16.0, 64.0};
    const auto sweep = zvonkin::lambda_sweep(model, lambdas, 0.5, grid, {0.25, 0.5}, cfg);

    csv::Writer w(dir + "/c10_lambda_sweep.csv", {"lambda", "contraction", "se"});
    for (size_t i = 0; i < lambdas.size(); ++i)
        w.row({sweep.lambdas[i], sweep.contraction[i], sweep.se[i]});

    const auto env = zvonkin::envelope_slope(modulus::ModulusFn::power(1.0 / 3.0), lambdas, 1.0);
    const bool env_ok = std::abs(env.slope + 1.0 / 6.0) <= 0.05;
    const bool pass = sweep.monotone_within_2se && env_ok;
    return {pass, "contraction " + num(sweep.contraction.front()) + " -> " +
                      num(sweep.contraction.back()) + (sweep.monotone_within_2se ? " monotone" : " NOT monotone") +
                      ", envelope slope " + num(env.slope) + ", threshold lambda " +
                      num(sweep.threshold_lambda)};
}

// ---- criterion 11: regularization demo -----------------------------------------

inline std::pair<bool, std::string> regularization_demo(uint64_t seed, const std::string& dir,
                                                        unsigned threads) {
    // mollification level chosen so the regularized drift varies at scales the
    // probe ladder resolves; lambda sits above the contraction-1/2 threshold
    const auto model = sde_lab::holder23_member(5);
    zvonkin::GridSpec grid;
    grid.lo = Vec::Constant(2, -2.0);
    grid.hi = Vec::Constant(2, 2.0);
    grid.npts = {49, 49};
    zvonkin::SolveConfig cfg;
    cfg.h = 1.0 / 64;
    cfg.mc = McConfig{seed, 512, threads, 600};
    const double T = 0.5, lambda = 16.0;
    auto field = std::make_shared<zvonkin::TransformField>(
        zvonkin::solve_u(model, lambda, T, grid, {T}, cfg, zvonkin::GradMethod::crn_fd));
    if (!(field->contraction < 0.5))
        return {false, "contraction " + num(field->contraction) + " not below 1/2"};
    const auto tr = zvonkin::build_transform(field);
    const auto coeffs = zvonkin::transformed_coeffs(model, tr);
    const int ti = field->time_index(T);

    std::vector<double> scales;
    for (int k = 1; k <= 7; ++k) scales.push_back(std::ldexp(1.0, -k));
    std::vector<Vec> dirs{(Vec(2) << 1.0, 0.0).finished()};

    // raw Hoelder drift component probed across its singular locus x1 = 0
    std::vector<Vec> centers;
    for (double c : {0.0, 0.5, -0.5}) centers.push_back((Vec(2) << 0.0, c).finished());
    auto raw = zvonkin::lipschitz_probe(
        [](const Vec& x) { return Vec::Constant(1, -std::pow(std::abs(x(0)), 2.0 / 3.0)); }, centers,
        dirs, scales);

    std::vector<Vec> ycenters;
    for (const auto& c : centers) ycenters.push_back(tr.forward(ti, c));
    auto reg = zvonkin::lipschitz_probe([&](const Vec& y) { return coeffs.g(ti, y); }, ycenters,
                                        dirs, scales);

    csv::Writer w(dir + "/c11_regularization.csv", {"r", "L_raw", "L_transformed"});
    for (size_t i = 0; i < scales.size(); ++i) w.row({raw.r[i], raw.L[i], reg.L[i]});

    const bool raw_ok = std::abs(raw.fit.slope + 1.0 / 3.0) <= 0.07;
    const bool reg_ok = reg.fit.slope > -0.1;
    return {raw_ok && reg_ok, "raw slope " + num(raw.fit.slope) + " (want -1/3), transformed slope " +
                                  num(reg.fit.slope) + " (want > -0.1), contraction " +
                                  num(field->contraction)};
}

// ---- criterion 12: stability ladder ---------------------------------------------

inline std::pair<bool, std::string> stability_ladder(uint64_t seed, const std::string& dir,
                                                     unsigned threads) {
    std::vector<int> ks{1, 2, 3, 4, 5, 6, 7, 8};
    McConfig mc{seed, 2000, threads, 700};
    const auto lad = sde_lab::stability_experiment(
        [](int k) { return sde_lab::holder23_member(k); }, pv1(0.0, 0.0), 1.0, 0.02, mc, ks,
        std::ldexp(1.0, -9));
    csv::Writer w(dir + "/c12_stability.csv", {"k", "p", "se", "flag_rate"});
    for (size_t i = 0; i < ks.size(); ++i)
        w.row({static_cast<double>(lad.k[i]), lad.p[i], lad.se[i], lad.flag_rate});
    bool monotone = true;
    for (size_t i = 1; i < lad.p.size(); ++i)
        if (lad.p[i] > lad.p[i - 1] + 2.0 * (lad.se[i] + lad.se[i - 1])) monotone = false;
    std::string ps;
    for (double p : lad.p) ps += num(p) + " ";
    return {monotone, "p_k ladder: " + ps};
}

// ---- criterion 13: Lyapunov checks ------------------------------------------------

inline std::pair<bool, std::string> lyapunov_checks(const std::string& dir) {
    sde_lab::Example11Params p;
    p.alpha = 1.0;
    p.c1 = 0.5;
    p.c2 = 0.0;
    const auto model = sde_lab::example_1_1(p);
    std::vector<PhaseVector> grid;
    for (int i = -10; i <= 10; ++i)
        for (int j = -10; j <= 10; ++j) grid.push_back(pv1(i, j));
    const auto rep = sde_lab::lyapunov_check(model, grid);
    csv::Writer w(dir + "/c13_lyapunov.csv",
                  {"max_generator_ratio", "max_grad_ratio", "delta1", "delta2"});
    w.row({rep.max_generator_ratio, rep.max_grad_ratio, rep.delta1, rep.delta2});
    const double documented = std::max(1.0, 1.0 * 1.0);  // max(1, d ||sigma||^2), sigma = I, d = 1
    const bool pass = rep.finite && rep.max_generator_ratio <= documented + 1e-9 &&
                      rep.max_grad_ratio <= 2.0 + 1e-12;
    return {pass, "generator ratio " + num(rep.max_generator_ratio) + " <= " + num(documented) +
                      ", grad ratio " + num(rep.max_grad_ratio) + " <= 2, sandwich [" +
                      num(rep.delta1) + ", " + num(rep.delta2) + "]"};
}

inline std::vector<CriterionResult> run_1_to_13(uint64_t seed, const std::string& dir,
                                                unsigned threads) {
    std::filesystem::create_directories(dir);
    std::vector<CriterionResult> out;
    out.push_back(timed(1, "kolmogorov_covariance", [&] { return kolmogorov_covariance(seed, dir, threads); }));
    out.push_back(timed(2, "bismut_vs_fd", [&] { return bismut_vs_fd(seed, dir, threads); }));
    out.push_back(timed(3, "null_shift", [&] { return null_shift(seed, dir); }));
    out.push_back(timed(4, "moment_scalings", [&] { return moment_scalings(seed, dir, threads); }));
    out.push_back(timed(5, "qinv_scaling", [&] { return qinv_scaling(dir); }));
    out.push_back(timed(6, "resolvent_oracle", [&] { return resolvent_oracle(dir); }));
    out.push_back(timed(7, "modulus_characterization", [&] { return modulus_characterization(dir); }));
    out.push_back(timed(8, "commutator_ladder", [&] { return commutator_ladder(dir); }));
    out.push_back(timed(9, "commutation_identity", [&] { return commutation_identity(seed, dir, threads); }));
    out.push_back(timed(10, "lambda_sweep", [&] { return lambda_sweep(seed, dir, threads); }));
    out.push_back(timed(11, "regularization_demo", [&] { return regularization_demo(seed, dir, threads); }));
    out.push_back(timed(12, "stability_ladder", [&] { return stability_ladder(seed, dir, threads); }));
    out.push_back(timed(13, "lyapunov_checks", [&] { return lyapunov_checks(dir); }));
    return out;
}

inline std::pair<bool, std::string> compare_csv_trees(const std::string& a, const std::string& b) {
    namespace fs = std::filesystem;
    size_t n_files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
        ++n_files;
        const auto rel = fs::relative(entry.path(), a);
        const auto other = fs::path(b) / rel;
        if (!fs::exists(other)) return {false, "missing " + other.string()};
        std::ifstream fa(entry.path(), std::ios::binary), fb(other, std::ios::binary);
        std::stringstream sa, sb;
        sa << fa.rdbuf();
        sb << fb.rdbuf();
        if (sa.str() != sb.str()) return {false, "byte mismatch in " + rel.string()};
    }
    return {n_files > 0, std::to_string(n_files) + " CSV files byte-identical"};
}

}  // namespace detail

// Runs every criterion with pinned seeds; criterion 14 repeats the whole suite
// with the same seed and byte-compares the emitted CSVs.
inline std::vector<CriterionResult> run_all(uint64_t seed, const std::string& out_dir,
                                            unsigned threads, bool with_determinism = true) {
    auto results = detail::run_1_to_13(seed, out_dir + "/run1", threads);
    if (with_determinism) {
        const auto t0 = detail::Clock::now();
        auto rerun = detail::run_1_to_13(seed, out_dir + "/run2", threads);
        (void)rerun;
        auto [same, msg] = detail::compare_csv_trees(out_dir + "/run1", out_dir + "/run2");
        CriterionResult r;
        r.id = 14;
        r.name = "determinism";
        r.pass = same;
        r.detail = msg;
        r.seconds = std::chrono::duration<double>(detail::Clock::now() - t0).count();
        results.push_back(r);
    }
    return results;
}

}  // namespace hamlab::acceptance
