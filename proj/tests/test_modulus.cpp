#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hamlab/modulus.hpp"

using namespace hamlab;
using modulus::ModulusFn;
using modulus::Verdict;

namespace {
const double kLog2 = std::log(2.0);
}

TEST_CASE("eval on the built-in families", "[modulus]") {
    const auto lp2 = ModulusFn::log_power(2.0);
    CHECK(lp2(1.0) == Catch::Approx(1.0 / (kLog2 * kLog2)).epsilon(1e-14));  // ~2.08137

    const auto p1 = ModulusFn::power(1.0);
    CHECK(p1(0.5) == 0.5);

    const auto br0 = modulus::bracket(0.0, ModulusFn::constant(1.0));
    CHECK(br0(2.0) == Catch::Approx(2.0));  // linear branch with c_0 = 1
    CHECK(br0(0.25) == Catch::Approx(1.0));

    CHECK_THROWS_AS(lp2(0.0), std::domain_error);
    CHECK_THROWS_AS(lp2(-1.0), std::domain_error);

    const auto g1 = ModulusFn::class_c_gamma(1);
    CHECK(g1(1.0) == Catch::Approx(kLog2));
    const auto g3 = ModulusFn::class_c_gamma(3);
    CHECK(g3(0.5) > 0.0);
}

TEST_CASE("linear extension uses the unit-interval supremum", "[modulus]") {
    const auto ext = ModulusFn::linear_extended(ModulusFn::power(0.5));
    CHECK(ext(0.25) == Catch::Approx(0.5));
    CHECK(ext(4.0) == Catch::Approx(4.0));  // sup_{(0,1]} sqrt = 1
}

TEST_CASE("dini integral ladder classification", "[modulus]") {
    // oracle values: independent high-precision quadrature of the partial
    // integral over [2^-60, 1]
    const auto r2 = modulus::dini_integral(ModulusFn::log_power(2.0));
    CHECK(r2.verdict == Verdict::Converges);
    CHECK(r2.value == Catch::Approx(1.9695147633172208).epsilon(1e-7));

    const auto r1 = modulus::dini_integral(ModulusFn::log_power(1.0));
    CHECK(r1.verdict == Verdict::Diverges);

    const auto rc = modulus::dini_integral(ModulusFn::constant(1.0));
    CHECK(rc.verdict == Verdict::Diverges);
    CHECK(rc.value == Catch::Approx(60.0 * kLog2).epsilon(1e-12));

    const auto rp = modulus::dini_integral(ModulusFn::power(0.5));
    CHECK(rp.verdict == Verdict::Converges);
    CHECK(rp.value == Catch::Approx(2.0 * (1.0 - std::ldexp(1.0, -30))).epsilon(1e-9));

    const auto rg = modulus::dini_integral(ModulusFn::class_c_gamma(1));
    CHECK(rg.verdict == Verdict::Diverges);
}

TEST_CASE("dini verdicts match the analytic classification of log powers", "[modulus]") {
    for (double beta : {2.0, 3.0, 4.0})
        CHECK(modulus::dini_integral(ModulusFn::log_power(beta)).verdict == Verdict::Converges);
    for (double beta : {0.5, 1.0})
        CHECK(modulus::dini_integral(ModulusFn::log_power(beta)).verdict == Verdict::Diverges);
}

TEST_CASE("slow variation defect", "[modulus]") {
    const double d_lp = modulus::slow_variation_defect(ModulusFn::log_power(2.0), {0.5, 2.0});
    CHECK(d_lp == Catch::Approx(0.10803307250013106).epsilon(1e-6));
    CHECK(d_lp < 0.15);

    const double d_pow = modulus::slow_variation_defect(ModulusFn::power(0.5), {2.0});
    CHECK(d_pow == Catch::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-12));

    const double d_const = modulus::slow_variation_defect(ModulusFn::constant(1.0), {0.1, 0.5, 2.0});
    CHECK(d_const == 0.0);

    CHECK_THROWS_AS(modulus::slow_variation_defect(ModulusFn::constant(1.0), {}),
                    std::invalid_argument);
}

TEST_CASE("bracket coefficient", "[modulus]") {
    const auto b1 = modulus::bracket(0.5, ModulusFn::log_power(2.0));
    CHECK(b1.linear_coeff() == Catch::Approx(1.0 / (kLog2 * kLog2)).epsilon(1e-9));

    const auto b2 = modulus::bracket(1.0, ModulusFn::constant(1.0));
    CHECK(b2.linear_coeff() == Catch::Approx(1.0).epsilon(1e-12));

    const auto b3 = modulus::bracket(0.0, ModulusFn::log_power(2.0));
    CHECK(b3.linear_coeff() == Catch::Approx(1.0 / (kLog2 * kLog2)).epsilon(1e-9));

    // interior maximum; oracle from a bounded golden search run separately
    const auto b4 = modulus::bracket(0.5, ModulusFn::class_c_gamma(1));
    CHECK(b4.linear_coeff() == Catch::Approx(0.8047423425494119).epsilon(1e-6));

    // sup of s^0 * gamma1(s) escapes to infinity near 0
    CHECK_THROWS_AS(modulus::bracket(0.0, ModulusFn::class_c_gamma(1)), std::domain_error);

    // two-branch values
    CHECK(b1(0.25) == Catch::Approx(0.5 * ModulusFn::log_power(2.0)(0.25)));
    CHECK(b1(3.0) == Catch::Approx(3.0 * b1.linear_coeff()));
}

TEST_CASE("bracket coefficient agrees with a dense independent grid scan", "[modulus]") {
    const auto base = ModulusFn::class_c_gamma(1);
    double best = 0.0;
    for (int i = 0; i <= 1000000; ++i) {
        const double s = 1e-8 + (1.0 - 1e-8) * i / 1000000.0;
        best = std::max(best, std::sqrt(s) * base(s));
    }
    const auto br = modulus::bracket(0.5, base);
    CHECK(br.linear_coeff() == Catch::Approx(best).epsilon(1e-6));
}

TEST_CASE("property suite constants", "[modulus]") {
    const auto grid = modulus::default_pair_grid();

    // psi(t) = sqrt(t) on (0,1]: the ratio bound holds with C = 1
    const auto sqrt_br = modulus::bracket(0.5, ModulusFn::constant(1.0));
    const auto rep = modulus::property_suite(sqrt_br, 0.5, 0.1, grid);
    CHECK(rep.all_finite);
    CHECK(rep.c_ratio == Catch::Approx(1.0).epsilon(1e-9));

    // linear modulus: subadditivity with constant exactly 1
    const auto lin = ModulusFn::power(1.0);
    const auto rep_lin = modulus::property_suite(lin, 1.0, 0.1, grid);
    CHECK(rep_lin.c_subadd == Catch::Approx(1.0).epsilon(1e-12));

    // Dini bracket: integral bounds finite
    const auto br = modulus::bracket(1.0 / 3.0, ModulusFn::log_power(2.0));
    const auto rep_br = modulus::property_suite(br, 1.0 / 3.0, 0.1, grid);
    CHECK(rep_br.all_finite);
    CHECK(rep_br.c_int_lower > 0.0);
    CHECK(rep_br.c_int_upper > 0.0);
}

TEST_CASE("ratio-bound constant is stable under grid refinement", "[modulus]") {
    const auto br = modulus::bracket(1.0 / 3.0, ModulusFn::log_power(2.0));
    const auto rep_a = modulus::property_suite(br, 1.0 / 3.0, 0.1, modulus::default_pair_grid(25));
    const auto rep_b = modulus::property_suite(br, 1.0 / 3.0, 0.1, modulus::default_pair_grid(50));
    CHECK(rep_b.c_ratio <= rep_a.c_ratio * 1.10 + 1e-12);
    CHECK(rep_b.c_ratio >= rep_a.c_ratio * 0.90);
}

TEST_CASE("monotonicity scan of the standard families", "[modulus]") {
    CHECK(modulus::nondecreasing_on_unit(ModulusFn::log_power(2.0)));
    CHECK(modulus::nondecreasing_on_unit(ModulusFn::power(0.7)));
    CHECK(modulus::nondecreasing_on_unit(modulus::bracket(0.5, ModulusFn::log_power(2.0))));
    CHECK_FALSE(modulus::nondecreasing_on_unit(ModulusFn::class_c_gamma(1)));
}

TEST_CASE("class-C diagnostics for the three gammas", "[modulus]") {
    for (int level : {1, 2, 3}) {
        const auto rep = modulus::class_c_report(level);
        CHECK(rep.liminf_proxy > 0.0);
        CHECK(rep.integral_diverges);
    }
    CHECK_THROWS_AS(modulus::class_c_report(4), std::invalid_argument);
}

TEST_CASE("analytic gamma derivative matches finite differences away from 0", "[modulus]") {
    for (int level : {1, 2, 3}) {
        const auto g = ModulusFn::class_c_gamma(level);
        for (double t : {0.05, 0.2, 0.7}) {
            const double fd = t * (g(t + 1e-7) - g(t - 1e-7)) / 2e-7;
            CHECK(modulus::gamma_t_derivative(level, t) == Catch::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("config grammar round trips", "[modulus]") {
    const std::vector<std::string> exprs = {
        "logpow(2)",
        "pow(0.5)",
        "const(1)",
        "bracket(1/3, logpow(2))",
        "bracket(0.5, const(1))",
        "product(pow(0.5), const(2))",
        "linext(pow(0.5))",
        "gamma1",
        "gamma2",
        "gamma3",
        "product(bracket(1/2, logpow(2)), pow(0.25))",
    };
    for (const auto& s : exprs) {
        const auto m = ModulusFn::parse(s);
        const auto m2 = ModulusFn::parse(m.to_string());
        for (int i = 1; i <= 20; ++i) {
            const double t = 0.001 + 0.12 * i;
            CHECK(m(t) == Catch::Approx(m2(t)).epsilon(1e-14));
        }
    }
    CHECK_THROWS_AS(ModulusFn::parse("nope(1)"), std::invalid_argument);
    CHECK_THROWS_AS(ModulusFn::parse("pow(0.5) junk"), std::invalid_argument);
    CHECK_THROWS_AS(ModulusFn::parse("pow(2)"), std::invalid_argument);  // alpha outside [0,1]
}
