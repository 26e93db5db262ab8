#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "hamlab/heat_probe.hpp"
#include "hamlab/quad.hpp"

using namespace hamlab;
using heat_probe::GridFunction;

TEST_CASE("heat semigroup fixes constants and affine functions", "[heat]") {
    const auto c = GridFunction::sample_1d(257, 2.0, [](double) { return 3.5; });
    const auto pc = heat_probe::heat_apply(c, 0.05, 0, 0);
    for (int i = 0; i < c.n; ++i) CHECK(pc.at(i) == Catch::Approx(3.5).margin(1e-12));
    const auto dc = heat_probe::heat_apply(c, 0.05, 0, 1);
    CHECK(dc.sup_norm() < 1e-10);

    const auto lin = GridFunction::sample_1d(257, 2.0, [](double x) { return 2.0 * x - 1.0; });
    const auto pl = heat_probe::heat_apply(lin, 0.05, 0, 0);
    for (int i = 0; i < lin.n; ++i) CHECK(pl.at(i) == Catch::Approx(lin.at(i)).margin(1e-10));
    CHECK(heat_probe::heat_apply(lin, 0.05, 0, 1).sup_norm() < 1e-6);
}

TEST_CASE("Gaussian second moment", "[heat]") {
    const auto sq = GridFunction::sample_1d(513, 2.0, [](double x) { return x * x; },
                                            heat_probe::GrowthTag::polynomial);
    const double theta = 0.04;
    const auto p = heat_probe::heat_apply(sq, theta, 0, 0);
    CHECK(p.at(256) == Catch::Approx(theta).margin(1e-8));  // P_theta (x^2)(0) = theta
}

TEST_CASE("resolution guard", "[heat]") {
    const auto f = GridFunction::sample_1d(129, 2.0, [](double x) { return x; });
    CHECK_THROWS_AS(heat_probe::heat_apply(f, 1e-4, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(heat_probe::heat_apply(f, 1.5, 0, 0), std::invalid_argument);
}

TEST_CASE("semigroup composition", "[heat]") {
    const auto f = GridFunction::sample_1d(513, 3.0, [](double x) { return std::cos(2.0 * x); });
    const double t1 = 0.02, t2 = 0.03;
    const auto once = heat_probe::heat_apply(heat_probe::heat_apply(f, t1, 0, 0), t2, 0, 0);
    const auto both = heat_probe::heat_apply(f, t1 + t2, 0, 0);
    double err = 0.0;
    for (int i = f.n / 4; i < 3 * f.n / 4; ++i) err = std::max(err, std::abs(once.at(i) - both.at(i)));
    CHECK(err < 1e-8);
}

TEST_CASE("mass conservation for compactly supported data", "[heat]") {
    const auto bump = GridFunction::sample_1d(513, 3.0, [](double x) {
        return std::abs(x) < 1.0 ? std::exp(-1.0 / (1.0 - x * x)) : 0.0;
    });
    const auto p = heat_probe::heat_apply(bump, 0.02, 0, 0);
    double m0 = 0.0, m1 = 0.0;
    for (int i = 0; i < bump.n; ++i) {
        m0 += bump.at(i) * bump.dx();
        m1 += p.at(i) * p.dx();
    }
    CHECK(m1 == Catch::Approx(m0).margin(1e-8));
}

TEST_CASE("kernel derivative weights match finite differences of the kernel", "[heat]") {
    const double theta = 0.3;
    for (double z : {-0.7, -0.1, 0.2, 0.9}) {
        const double p0 = heat_probe::detail::kernel_deriv(z, theta, 0, 0);
        const double dz = (heat_probe::detail::kernel_deriv(z + 1e-6, theta, 0, 0) -
                           heat_probe::detail::kernel_deriv(z - 1e-6, theta, 0, 0)) /
                          2e-6;
        CHECK(heat_probe::detail::kernel_deriv(z, theta, 1, 0) == Catch::Approx(dz).epsilon(1e-6));
        const double dt = (heat_probe::detail::kernel_deriv(z, theta + 1e-7, 0, 0) -
                           heat_probe::detail::kernel_deriv(z, theta - 1e-7, 0, 0)) /
                          2e-7;
        CHECK(heat_probe::detail::kernel_deriv(z, theta, 0, 1) == Catch::Approx(dt).epsilon(1e-5));
        const double dzt = (heat_probe::detail::kernel_deriv(z, theta + 1e-7, 1, 0) -
                            heat_probe::detail::kernel_deriv(z, theta - 1e-7, 1, 0)) /
                           2e-7;
        CHECK(heat_probe::detail::kernel_deriv(z, theta, 1, 1) == Catch::Approx(dzt).epsilon(1e-5));
        (void)p0;
    }
}

TEST_CASE("seminorms", "[heat]") {
    const auto lin = GridFunction::sample_1d(513, 2.0, [](double x) { return x; });
    CHECK(heat_probe::seminorm(lin, modulus::ModulusFn::power(1.0)) == Catch::Approx(1.0).epsilon(1e-12));

    const auto sq = GridFunction::sample_1d(2049, 2.0, [](double x) { return std::sqrt(std::abs(x)); });
    CHECK(heat_probe::seminorm(sq, modulus::ModulusFn::power(0.5)) == Catch::Approx(1.0).epsilon(1e-2));

    const auto c = GridFunction::sample_1d(129, 2.0, [](double) { return 4.2; });
    CHECK(heat_probe::seminorm(c, modulus::ModulusFn::power(0.5)) == 0.0);
}

TEST_CASE("modulus estimator two-sided band and divergence detection", "[heat]") {
    const auto psi = modulus::ModulusFn::power(0.5);
    std::vector<double> thetas;
    for (int k = 2; k <= 13; ++k) thetas.push_back(std::ldexp(1.0, -k));

    const auto f = GridFunction::sample_1d(1025, 2.0,
                                           [](double x) { return std::min(std::sqrt(std::abs(x)), 1.0); });
    const auto est = heat_probe::modulus_estimate(f, psi, thetas);
    const double norm = heat_probe::seminorm(f, psi) + f.sup_norm();
    CHECK(est.value / norm > 0.1);
    CHECK(est.value / norm < 10.0);
    CHECK_FALSE(est.divergent);

    const auto sgn = GridFunction::sample_1d(1025, 2.0,
                                             [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
    const auto est_sgn = heat_probe::modulus_estimate(sgn, psi, thetas);
    CHECK(est_sgn.divergent);

    const auto lin = GridFunction::sample_1d(1025, 2.0, [](double x) { return 0.3 * x; });
    const auto est_lin = heat_probe::modulus_estimate(lin, psi, thetas);
    CHECK(est_lin.sup_term < 1e-5);
}

TEST_CASE("commutator basics", "[heat]") {
    const auto psi = modulus::ModulusFn::power(0.25);
    const auto phi = modulus::ModulusFn::power(0.25);
    const auto c = GridFunction::sample_1d(513, 2.0, [](double) { return 2.0; });
    const auto g = GridFunction::sample_1d(513, 2.0, [](double x) { return std::cos(x); });
    const auto r = heat_probe::commutator(c, g, 0.01, psi, phi, 1.0);
    CHECK(r.field.sup_norm() < 1e-10);  // constants commute out

    const auto f = GridFunction::sample_1d(513, 2.0,
                                           [](double x) { return std::min(std::sqrt(std::abs(x)), 1.0); });
    const auto one = GridFunction::sample_1d(513, 2.0, [](double) { return 1.0; });
    const auto r2 = heat_probe::commutator(f, one, 0.01, psi, phi, 1.0);
    const auto direct = heat_probe::heat_apply(f, 0.01, 0, 1);
    double err = 0.0;
    for (int i = 0; i < f.n; ++i) err = std::max(err, std::abs(r2.field.at(i) - direct.at(i)));
    CHECK(err < 1e-10);

    const auto tiny = GridFunction::sample_1d(257, 2.0, [](double x) { return x; });
    CHECK_THROWS_AS(heat_probe::commutator(f, tiny, 0.01, psi, phi), std::invalid_argument);
}

TEST_CASE("commutator ladder stays within a factor of its median", "[heat]") {
    const auto f = GridFunction::sample_1d(1025, 2.0,
                                           [](double x) { return std::min(std::sqrt(std::abs(x)), 1.0); });
    const auto g = GridFunction::sample_1d(1025, 2.0, [](double x) { return std::cos(x); });
    std::vector<double> thetas;
    for (int k = 2; k <= 8; ++k) thetas.push_back(std::ldexp(1.0, -k));
    const auto ladder = heat_probe::commutator_ladder(f, g, thetas, modulus::ModulusFn::power(0.25),
                                                      modulus::ModulusFn::power(0.25));
    REQUIRE(ladder.size() >= 6);
    std::vector<double> cs;
    for (auto& [th, c] : ladder) cs.push_back(c);
    std::sort(cs.begin(), cs.end());
    const double median = cs[cs.size() / 2];
    CHECK(cs.back() <= 3.0 * median);
    CHECK(cs.front() >= median / 3.0);
}

TEST_CASE("anisotropic operators", "[heat]") {
    const auto fx = GridFunction::sample_2d(129, 1.0, [](double a, double) { return a; });
    CHECK(heat_probe::seminorm_axis(fx, modulus::ModulusFn::power(1.0), 1) ==
          Catch::Approx(1.0).epsilon(1e-12));
    CHECK(heat_probe::seminorm_axis(fx, modulus::ModulusFn::power(1.0), 2) == 0.0);

    const auto fxy = GridFunction::sample_2d(129, 1.0, [](double a, double b) { return a * b; });
    CHECK(heat_probe::seminorm_axis(fxy, modulus::ModulusFn::power(1.0), 1) ==
          Catch::Approx(1.0).epsilon(1e-12));

    // axis-1 smoothing leaves a function of x2 untouched
    const auto fy = GridFunction::sample_2d(129, 1.0, [](double, double b) { return std::sin(b); });
    const auto sm = heat_probe::heat_axis(fy, 0.01, 1, 0, 0);
    double err = 0.0;
    for (size_t i = 0; i < fy.v.size(); ++i) err = std::max(err, std::abs(sm.v[i] - fy.v[i]));
    CHECK(err < 1e-10);

    // 2D isotropic theta-derivative kills affine functions
    const auto aff = GridFunction::sample_2d(129, 1.0, [](double a, double b) { return a + 2.0 * b; });
    CHECK(heat_probe::heat_apply(aff, 0.01, 0, 1).sup_norm() < 1e-6);
}

TEST_CASE("full 2D seminorm sees diagonal pairs", "[heat]") {
    const auto fxy = GridFunction::sample_2d(129, 1.0, [](double a, double b) { return a + b; });
    const double s = heat_probe::seminorm(fxy, modulus::ModulusFn::power(1.0));
    CHECK(s == Catch::Approx(std::sqrt(2.0)).epsilon(1e-6));
}

TEST_CASE("kernel moment bound has a stable constant", "[heat]") {
    // int |z|^beta psi(|z|) p_theta(z) dz <= C theta^{beta/2} psi(sqrt(theta))
    for (double alpha : {0.3, 0.5, 0.8}) {
        for (double beta : {0.0, 1.0, 2.0}) {
            double cmin = 1e300, cmax = 0.0;
            for (int k = 2; k <= 10; ++k) {
                const double theta = std::ldexp(1.0, -k);
                const double sd = std::sqrt(theta);
                const double integral = quad::gauss16_panels(
                    [&](double z) {
                        const double p = std::exp(-z * z / (2.0 * theta)) / std::sqrt(2.0 * kPi * theta);
                        return 2.0 * std::pow(z, beta) * std::pow(z, alpha) * p;
                    },
                    1e-12, 12.0 * sd, 400);
                const double ratio = integral / (std::pow(theta, beta / 2.0) * std::pow(sd, alpha));
                cmin = std::min(cmin, ratio);
                cmax = std::max(cmax, ratio);
            }
            CHECK(cmax / cmin <= 1.2);
        }
    }
}

TEST_CASE("smoothed-field derivative bounds along the ladder", "[heat]") {
    const auto f = GridFunction::sample_1d(2049, 2.0,
                                           [](double x) { return std::min(std::sqrt(std::abs(x)), 1.0); });
    const auto psi = modulus::ModulusFn::power(0.5);
    for (auto [k, j] : std::vector<std::pair<int, int>>{{1, 0}, {0, 1}, {1, 1}}) {
        std::vector<double> vals;
        for (int kk = 4; kk <= 12; ++kk) {
            const double theta = std::ldexp(1.0, -kk);
            const auto d = heat_probe::heat_apply(f, theta, k, j);
            vals.push_back(d.sup_norm() * std::pow(theta, 0.5 * k + j) / psi(std::sqrt(theta)));
        }
        std::vector<double> sorted = vals;
        std::sort(sorted.begin(), sorted.end());
        CHECK(sorted.back() <= 3.5 * sorted[sorted.size() / 2]);
    }
}

TEST_CASE("grid file round trip", "[heat]") {
    const auto f = GridFunction::sample_1d(129, 1.5, [](double x) { return std::sin(3 * x); },
                                           heat_probe::GrowthTag::polynomial);
    const auto path = std::filesystem::temp_directory_path() / "hamlab_grid_test.txt";
    heat_probe::write_grid(f, path.string());
    const auto g = heat_probe::read_grid(path.string());
    CHECK(g.dim == f.dim);
    CHECK(g.n == f.n);
    CHECK(g.L == f.L);
    CHECK(g.growth == f.growth);
    for (size_t i = 0; i < f.v.size(); ++i) CHECK(g.v[i] == f.v[i]);
    std::filesystem::remove(path);

    const auto f2 = GridFunction::sample_2d(129, 1.0, [](double a, double b) { return a - b; });
    const auto path2 = std::filesystem::temp_directory_path() / "hamlab_grid2_test.txt";
    heat_probe::write_grid(f2, path2.string());
    const auto g2 = heat_probe::read_grid(path2.string());
    CHECK(g2.v == f2.v);
    std::filesystem::remove(path2);
}

TEST_CASE("grid validation", "[heat]") {
    CHECK_THROWS_AS(GridFunction(1, 128, 1.0, heat_probe::GrowthTag::bounded), std::invalid_argument);
    CHECK_THROWS_AS(GridFunction(1, 127, 1.0, heat_probe::GrowthTag::bounded), std::invalid_argument);
    CHECK_THROWS_AS(GridFunction(3, 129, 1.0, heat_probe::GrowthTag::bounded), std::invalid_argument);
    CHECK_THROWS_AS(GridFunction(2, 1027, 1.0, heat_probe::GrowthTag::bounded), std::invalid_argument);
}
