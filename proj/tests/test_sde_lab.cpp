#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hamlab/linear_flow.hpp"
#include "hamlab/sde_lab.hpp"

using namespace hamlab;
using namespace hamlab::sde_lab;

namespace {
PhaseVector pv(double a, double b) { return {Vec::Constant(1, a), Vec::Constant(1, b)}; }
}  // namespace

TEST_CASE("driver refinement consistency", "[sde]") {
    BrownianDriver d(99, 0, 1.0, 1.0 / 64, 1);
    const Vec whole = d.increment(0, 64);
    Vec sum = Vec::Zero(1);
    for (int k = 0; k < 8; ++k) sum += d.increment(k, 8);
    CHECK((whole - sum).cwiseAbs().maxCoeff() < 1e-15);
    const Vec a = d.increment(0, 4), b = d.increment(1, 4);
    CHECK(((a + b) - d.increment(0, 8)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("zero velocity drift integrates the driver exactly", "[sde]") {
    // b2 = 0 keeps the coupling b1 = x2: X2 is the Brownian path itself and
    // X1 its Euler sum, both recomputable directly from the stored driver
    const auto m = linear(Mat::Identity(1, 1), Mat::Identity(1, 1));

    BrownianDriver driver(5, 0, 1.0, 1.0 / 256, 1);
    const auto path = integrate(m, pv(0.0, 0.0), 1.0 / 256, 1.0, driver);
    // X2 is the Brownian path at grid points, X1 its left-endpoint Riemann sum
    double w = 0.0, riemann = 0.0;
    for (int k = 0; k < 256; ++k) {
        riemann += w / 256.0;
        w += driver.increment(k, 1)(0);
        CHECK(path.states[k + 1](1) == Catch::Approx(w).margin(1e-14));
        CHECK(path.states[k + 1](0) == Catch::Approx(riemann).margin(1e-14));
    }
}

TEST_CASE("linear preset terminal law matches the exact Gaussian law", "[sde]") {
    const auto model = linear(Mat::Identity(1, 1), Mat::Identity(1, 1));
    const auto flow_path =
        linear_flow::TimeMatrixPath::constant(Mat::Identity(1, 1), Mat::Identity(1, 1), 0.0, 1.0);
    const auto law = linear_flow::state_law(flow_path, 0.0, 1.0, pv(0.0, 0.5));

    const std::size_t n = 100000;
    const double h = std::ldexp(1.0, -10);
    const uint64_t sd = derive_seed(4242, 1);
    stats::MultiAccum acc(5);
    std::vector<double> row(5);
    for (std::size_t i = 0; i < n; ++i) {
        BrownianDriver driver(sd, i, 1.0, h, 1);
        const auto path = integrate(model, pv(0.0, 0.5), h, 1.0, driver);
        const double x1 = path.terminal()(0), x2 = path.terminal()(1);
        row = {x1, x2, x1 * x1, x1 * x2, x2 * x2};
        acc.add(row);
    }
    const double m1 = acc.acc[0].mean(), m2 = acc.acc[1].mean();
    CHECK(std::abs(m1 - law.mean(0)) <= 3.0 * acc.acc[0].stderr_mean());
    CHECK(std::abs(m2 - law.mean(1)) <= 3.0 * acc.acc[1].stderr_mean());
    const double c11 = acc.acc[2].mean() - m1 * m1;
    const double c12 = acc.acc[3].mean() - m1 * m2;
    const double c22 = acc.acc[4].mean() - m2 * m2;
    const double se11 = law.cov(0, 0) * std::sqrt(2.0 / n);
    const double se12 = std::sqrt((law.cov(0, 0) * law.cov(1, 1) + law.cov(0, 1) * law.cov(0, 1)) / n);
    const double se22 = law.cov(1, 1) * std::sqrt(2.0 / n);
    CHECK(std::abs(c11 - law.cov(0, 0)) <= 3.0 * se11);
    CHECK(std::abs(c12 - law.cov(0, 1)) <= 3.0 * se12);
    CHECK(std::abs(c22 - law.cov(1, 1)) <= 3.0 * se22);
}

TEST_CASE("linear-model Jacobian is deterministic and exact", "[sde]") {
    const auto model = linear(Mat::Identity(1, 1), Mat::Identity(1, 1));
    const double T = 0.75, h = 1.0 / 128;
    Mat expected(2, 2);
    expected << 1.0, T, 0.0, 1.0;  // nilpotent generator: Euler is exact
    Mat first;
    for (uint64_t unit = 0; unit < 4; ++unit) {
        BrownianDriver driver(7, unit, T, h, 1);
        const auto path = integrate(model, pv(0.3, -0.1), h, T, driver, true);
        const Mat jac = path.jacobians.back();
        CHECK((jac - expected).cwiseAbs().maxCoeff() < 1e-12);
        if (unit == 0)
            first = jac;
        else
            CHECK((jac - first).cwiseAbs().maxCoeff() == 0.0);  // no noise enters
    }

    SdeModel no_jac;
    no_jac.b1 = [](double, const PhaseVector&) { return Vec::Zero(1); };
    no_jac.b2 = [](double, const PhaseVector&) { return Vec::Zero(1); };
    no_jac.sigma = [](double, const PhaseVector&) { return Mat::Identity(1, 1); };
    BrownianDriver driver(7, 0, T, h, 1);
    CHECK_THROWS_AS(integrate(no_jac, pv(0, 0), h, T, driver, true), std::invalid_argument);
}

TEST_CASE("example preset validation and drift values", "[sde]") {
    Example11Params bad;
    bad.alpha = 0.5;
    CHECK_THROWS_AS(example_1_1(bad), std::invalid_argument);
    Example11Params bad2;
    bad2.c1 = 0.0;
    CHECK_THROWS_AS(example_1_1(bad2), std::invalid_argument);

    Example11Params p;
    p.alpha = 1.0;
    p.c1 = 1.0;
    p.c2 = 0.0;
    const auto m = example_1_1(p);
    const auto x = pv(0.7, -0.3);
    CHECK(m.b1(0.0, x)(0) == Catch::Approx(-0.3));
    CHECK(m.b2(0.0, x)(0) == Catch::Approx(-2.0 * 0.7));  // -c1 (alpha+1) x1
    REQUIRE(m.H.has_value());
    CHECK(m.H->value(x) == Catch::Approx(1.0 + 0.5 * 0.09 + 0.49));

    // numeric gradient check of H
    const double eps = 1e-6;
    const Vec g = m.H->grad(x);
    const double d1 = (m.H->value(pv(0.7 + eps, -0.3)) - m.H->value(pv(0.7 - eps, -0.3))) / (2 * eps);
    const double d2 = (m.H->value(pv(0.7, -0.3 + eps)) - m.H->value(pv(0.7, -0.3 - eps))) / (2 * eps);
    CHECK(g(0) == Catch::Approx(d1).epsilon(1e-6));
    CHECK(g(1) == Catch::Approx(d2).epsilon(1e-6));

    // with the polynomial perturbation present, a carries the m-power term
    Example11Params pq = p;
    pq.c2 = 0.5;
    pq.m = 3;
    const auto mq = example_1_1(pq);
    REQUIRE(mq.a);
    CHECK(mq.a(0.0, x)(1) == Catch::Approx(-0.5 * 4.0 * std::pow(0.7, 3.0)));
}

TEST_CASE("augmented presets wire their blocks correctly", "[sde]") {
    const auto integ = integral_drift(
        1, [](double, const Vec& x) { return Vec::Constant(1, -x(0)); },
        [](double, const Vec&) { return Mat::Identity(1, 1); });
    const auto x = pv(2.0, 3.0);
    CHECK(integ.b1(0.0, x)(0) == Catch::Approx(-2.0 + 3.0));
    CHECK(integ.b2(0.0, x)(0) == 0.0);

    const auto delay = delay_sde(
        1, 1, [](double, const Vec& y) { return Vec::Constant(1, 2.0 * y(0)); },
        [](double, const Vec& a, const Vec& y) { return Vec::Constant(1, a(0) - y(0)); },
        [](double, const Vec&, const Vec&) { return Mat::Identity(1, 1); });
    CHECK(delay.b1(0.0, x)(0) == Catch::Approx(6.0));
    CHECK(delay.b2(0.0, x)(0) == Catch::Approx(2.0 - 3.0));
}

TEST_CASE("lyapunov diagnostics for the quadratic Hamiltonian", "[sde]") {
    Example11Params p;
    p.alpha = 1.0;
    p.c1 = 0.5;
    const auto m = example_1_1(p);
    std::vector<PhaseVector> grid;
    for (int i = -10; i <= 10; i += 2)
        for (int j = -10; j <= 10; j += 2) grid.push_back(pv(i, j));
    const auto rep = lyapunov_check(m, grid);
    CHECK(rep.finite);
    // generator term reduces to tr Sigma = 1/2 at the origin, smaller elsewhere
    CHECK(rep.max_generator_ratio == Catch::Approx(0.5).epsilon(1e-12));
    CHECK(rep.max_grad_ratio <= 2.0 + 1e-12);
    CHECK(rep.delta1 > 1.5);
    CHECK(rep.delta2 < 2.5);
}

TEST_CASE("lyapunov ratio decays at infinity for b = 0", "[sde]") {
    SdeModel m;
    m.b1 = [](double, const PhaseVector&) { return Vec::Zero(1); };
    m.b2 = [](double, const PhaseVector&) { return Vec::Zero(1); };
    m.sigma = [](double, const PhaseVector&) { return Mat::Identity(1, 1); };
    m.H = Lyapunov{
        [](const PhaseVector& x) { return 1.0 + x.x1.squaredNorm() + x.x2.squaredNorm(); },
        [](const PhaseVector& x) {
            Vec g(2);
            g << 2.0 * x.x1(0), 2.0 * x.x2(0);
            return g;
        },
        [](const PhaseVector&) { return 2.0 * Mat::Identity(1, 1); },
    };
    const auto rep_near = lyapunov_check(m, {pv(0, 0)});
    CHECK(rep_near.max_generator_ratio == Catch::Approx(1.0));  // tr(Sigma hess) = 1 at H = 1
    const auto rep_far = lyapunov_check(m, {pv(10, 10)});
    CHECK(rep_far.max_generator_ratio < 0.05);
}

TEST_CASE("exponential moment diagnostics", "[sde]") {
    SdeModel m;
    m.b1 = [](double, const PhaseVector&) { return Vec::Zero(1); };
    m.b2 = [](double, const PhaseVector&) { return Vec::Zero(1); };
    m.sigma = [](double, const PhaseVector&) { return Mat::Identity(1, 1); };
    m.eps_lyap = 1.0;
    m.H = Lyapunov{
        [](const PhaseVector& x) { return 1.0 + x.x2.squaredNorm(); },
        [](const PhaseVector& x) {
            Vec g(2);
            g << 0.0, 2.0 * x.x2(0);
            return g;
        },
        [](const PhaseVector&) { return 2.0 * Mat::Identity(1, 1); },
    };
    linear_flow::McConfig mc{55, 4000, 0, 2};
    const auto diag = moment_diag(m, pv(0, 0), 1.0, 0.25, mc, 1.0 / 128);
    CHECK(std::isfinite(diag.estimate));
    CHECK(diag.cap_hit_rate < 1e-3);
    CHECK(diag.estimate >= std::exp(1.0));  // H >= 1 throughout
    // reflection-style upper bound: P(sup |W| > a) <= 4 P(G > a)
    double bound = 0.0;
    const int nq = 4000;
    for (int i = 0; i < nq; ++i) {
        const double s = 6.0 * (i + 0.5) / nq;
        const double dens = 4.0 * std::exp(-s * s / 2.0) / std::sqrt(2.0 * kPi);
        bound += std::exp(std::pow(1.0 + s * s, 0.25)) * dens * 6.0 / nq;
    }
    bound += std::exp(1.0);  // mass at the origin
    CHECK(diag.estimate <= bound);

    // monotone in the cap
    const auto lo = moment_diag(m, pv(0, 0), 1.0, 0.25, mc, 1.0 / 128, 1.2);
    CHECK(lo.estimate <= diag.estimate + 1e-12);

    CHECK_THROWS_AS(moment_diag(m, pv(0, 0), 1.0, 1.5, mc, 1.0 / 128), std::invalid_argument);
}

TEST_CASE("moment diagnostics track the deterministic flow for tiny noise", "[sde]") {
    SdeModel m;
    m.b1 = [](double, const PhaseVector& x) { return x.x2; };
    m.b2 = [](double, const PhaseVector& x) { return Vec::Constant(1, -x.x1(0)); };
    m.sigma = [](double, const PhaseVector&) { return 1e-6 * Mat::Identity(1, 1); };
    m.eps_lyap = 1.0;
    m.H = Lyapunov{
        [](const PhaseVector& x) { return 1.0 + 0.5 * (x.x1.squaredNorm() + x.x2.squaredNorm()); },
        [](const PhaseVector& x) {
            Vec g(2);
            g << x.x1(0), x.x2(0);
            return g;
        },
        [](const PhaseVector&) { return Mat::Identity(1, 1); },
    };
    linear_flow::McConfig mc{66, 200, 0, 3};
    const auto diag = moment_diag(m, pv(1.0, 0.0), 1.0, 0.25, mc, 1.0 / 512);
    // rotation keeps H constant at 1.5 up to O(h)
    CHECK(diag.estimate == Catch::Approx(std::exp(std::pow(1.5, 0.25))).epsilon(2e-3));

    // log-estimate grows with the initial point
    linear_flow::McConfig mc2{66, 200, 0, 4};
    const auto d2 = moment_diag(m, pv(2.0, 0.0), 1.0, 0.25, mc2, 1.0 / 512);
    const auto d4 = moment_diag(m, pv(4.0, 0.0), 1.0, 0.25, mc2, 1.0 / 512, 60.0);
    CHECK(diag.estimate < d2.estimate);
    CHECK(d2.estimate < d4.estimate);
}

TEST_CASE("stability ladder for a constant family is identically zero", "[sde]") {
    linear_flow::McConfig mc{77, 200, 0, 5};
    const auto lad = stability_experiment([](int) { return holder23_member(6); }, pv(0, 0), 0.5,
                                          0.01, mc, {1, 2, 3}, 1.0 / 128);
    for (double p : lad.p) CHECK(p == 0.0);
}

TEST_CASE("stability ladder decreases for the smoothing family", "[sde]") {
    linear_flow::McConfig mc{88, 600, 0, 6};
    std::vector<int> ks{1, 2, 3, 4, 5, 6};
    const auto lad = stability_experiment([](int k) { return holder23_member(k); }, pv(0, 0), 1.0,
                                          0.02, mc, ks, std::ldexp(1.0, -9));
    for (size_t i = 1; i < lad.p.size(); ++i)
        CHECK(lad.p[i] <= lad.p[i - 1] + 2.0 * (lad.se[i] + lad.se[i - 1]));
    CHECK(lad.p.front() > lad.p.back());  // the ladder is informative, not flat
}

TEST_CASE("pathwise gap ladder and strong order", "[sde]") {
    // additive noise + Lipschitz drift: strong order ~ 1
    SdeModel m;
    m.b1 = [](double, const PhaseVector& x) { return x.x2; };
    m.b2 = [](double, const PhaseVector& x) { return Vec::Constant(1, -x.x2(0) - x.x1(0)); };
    m.sigma = [](double, const PhaseVector&) { return Mat::Identity(1, 1); };
    linear_flow::McConfig mc{99, 400, 0, 7};
    std::vector<double> hs{1.0 / 64, 1.0 / 128, 1.0 / 256, 1.0 / 512};
    const auto lad = pathwise_gap(m, pv(0.5, 0.0), 1.0, hs, mc);
    for (size_t i = 1; i < lad.gap.size(); ++i) CHECK(lad.gap[i] < lad.gap[i - 1]);
    CHECK(lad.order.slope == Catch::Approx(1.0).margin(0.3));

    // Hoelder drift: ladder still decreases; the fitted order is a report
    Example11Params p;
    p.alpha = 0.8;
    const auto rough = example_1_1(p);
    const auto lad2 = pathwise_gap(rough, pv(0.5, 0.0), 1.0, hs, mc);
    for (size_t i = 1; i < lad2.gap.size(); ++i) CHECK(lad2.gap[i] < lad2.gap[i - 1]);
}

TEST_CASE("blow-up detection truncates and flags", "[sde]") {
    SdeModel m;
    m.b1 = [](double, const PhaseVector&) { return Vec::Zero(1); };
    m.b2 = [](double, const PhaseVector& x) { return Vec::Constant(1, std::pow(x.x2(0), 3.0)); };
    m.sigma = [](double, const PhaseVector&) { return Mat::Identity(1, 1); };
    BrownianDriver driver(3, 0, 4.0, 1.0 / 64, 1);
    const auto path = integrate(m, pv(0.0, 4.0), 1.0 / 64, 4.0, driver);
    CHECK(path.blown_up);
    CHECK(path.states.size() < 257);
}

TEST_CASE("integrate validates step compatibility", "[sde]") {
    const auto m = linear(Mat::Identity(1, 1), Mat::Identity(1, 1));
    BrownianDriver driver(1, 0, 1.0, 1.0 / 64, 1);
    CHECK_THROWS_AS(integrate(m, pv(0, 0), 1.0 / 100, 1.0, driver), std::invalid_argument);
    CHECK_THROWS_AS(integrate(m, pv(0, 0), 1.0 / 128, 1.0, driver), std::invalid_argument);
}
