#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hamlab/common.hpp"
#include "hamlab/quad.hpp"

namespace hamlab::modulus {

// Closed symbolic family of moduli of continuity on (0, inf). Keeping the
// family closed (instead of accepting arbitrary callbacks) lets every
// operation have an exact-ish oracle and lets configs name instances.
class ModulusFn {
  public:
    enum class Family { LogPower, Power, Constant, Product, Bracket, LinearExtended, ClassCGamma };

    static ModulusFn log_power(double beta) {
        if (!(beta > 0)) throw std::invalid_argument("log_power: beta must be > 0");
        return ModulusFn(std::make_shared<Node>(Node{Family::LogPower, beta, 0.0, nullptr, nullptr}));
    }
    static ModulusFn power(double alpha) {
        if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("power: alpha must be in [0,1]");
        return ModulusFn(std::make_shared<Node>(Node{Family::Power, alpha, 0.0, nullptr, nullptr}));
    }
    static ModulusFn constant(double c) {
        if (!(c > 0)) throw std::invalid_argument("constant: c must be > 0");
        return ModulusFn(std::make_shared<Node>(Node{Family::Constant, c, 0.0, nullptr, nullptr}));
    }
    static ModulusFn product(const ModulusFn& l, const ModulusFn& r) {
        return ModulusFn(std::make_shared<Node>(Node{Family::Product, 0.0, 0.0, l.node_, r.node_}));
    }
    static ModulusFn class_c_gamma(int level) {
        if (level < 1 || level > 3) throw std::invalid_argument("class_c_gamma: level must be 1, 2 or 3");
        return ModulusFn(
            std::make_shared<Node>(Node{Family::ClassCGamma, static_cast<double>(level), 0.0, nullptr, nullptr}));
    }
    // psi_[0]: psi on (0,1], psi_*(1) * t beyond.
    static ModulusFn linear_extended(const ModulusFn& base) {
        const double sup = sup_on_unit(base, 0.0);
        return ModulusFn(std::make_shared<Node>(Node{Family::LinearExtended, 0.0, sup, base.node_, nullptr}));
    }

    double operator()(double t) const {
        if (!(t > 0)) throw std::domain_error("ModulusFn: argument must be > 0");
        return eval(*node_, t);
    }

    Family family() const { return node_->fam; }
    double param() const { return node_->p; }
    // c_alpha for Bracket, psi_*(1) for LinearExtended
    double linear_coeff() const { return node_->coeff; }
    ModulusFn left() const { return ModulusFn(node_->left); }
    ModulusFn right() const { return ModulusFn(node_->right); }

    std::string to_string() const { return print(*node_); }
    static ModulusFn parse(std::string_view text);

    friend ModulusFn bracket(double alpha, const ModulusFn& base);

  private:
    struct Node {
        Family fam;
        double p;       // beta, alpha, c, or gamma level
        double coeff;   // precomputed linear-branch slope
        std::shared_ptr<const Node> left, right;
    };

    explicit ModulusFn(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

    static double eval(const Node& n, double t) {
        switch (n.fam) {
            case Family::LogPower:
                return std::pow(std::log1p(1.0 / t), -n.p);
            case Family::Power:
                return std::pow(t, n.p);
            case Family::Constant:
                return n.p;
            case Family::Product:
                return eval(*n.left, t) * eval(*n.right, t);
            case Family::Bracket:
                return t <= 1.0 ? std::pow(t, n.p) * eval(*n.left, t) : n.coeff * t;
            case Family::LinearExtended:
                return t <= 1.0 ? eval(*n.left, t) : n.coeff * t;
            case Family::ClassCGamma:
                return gamma_value(static_cast<int>(n.p), t);
        }
        throw std::logic_error("ModulusFn: unreachable");
    }

    // log tower: bases 1, e, e^e keep every level strictly positive on (0,inf)
    static double gamma_value(int level, double t) {
        const double g1 = std::log1p(1.0 / t);
        if (level == 1) return g1;
        const double g2 = g1 * std::log(std::log(std::exp(1.0) + 1.0 / t));
        if (level == 2) return g2;
        return g2 * std::log(std::log(std::log(std::exp(std::exp(1.0)) + 1.0 / t)));
    }

    // sup over s in (0,1] of s^alpha * base(s): 4096-point log-uniform grid on
    // (1e-12, 1], then golden-section refinement around the grid argmax.
    static double sup_on_unit(const ModulusFn& base, double alpha) {
        constexpr int n = 4096;
        const double lo = 1e-12;
        auto f = [&](double s) { return std::pow(s, alpha) * base(s); };
        double best = -1.0;
        int best_i = 0;
        for (int i = 0; i < n; ++i) {
            const double s = lo * std::pow(1.0 / lo, static_cast<double>(i) / (n - 1));
            const double v = f(s);
            if (v > best) {
                best = v;
                best_i = i;
            }
        }
        if (best_i == 0) {
            // check whether the supremum escapes to 0
            double s = lo, prev = best;
            bool growing = true;
            for (int d = 0; d < 6; ++d) {
                s /= 10.0;
                const double v = f(s);
                if (v <= prev * 1.001) {
                    growing = false;
                    break;
                }
                prev = v;
            }
            if (growing)
                throw std::domain_error("ModulusFn: supremum of s^alpha*phi(s) unbounded near 0");
        }
        const double a = lo * std::pow(1.0 / lo, std::max(0, best_i - 1) / double(n - 1));
        const double b = lo * std::pow(1.0 / lo, std::min(n - 1, best_i + 1) / double(n - 1));
        return std::max(best, golden_max(f, a, b));
    }

    template <class F>
    static double golden_max(F f, double a, double b) {
        const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
        double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
        double f1 = f(x1), f2 = f(x2);
        for (int it = 0; it < 200 && (b - a) > 1e-15 * (1.0 + b); ++it) {
            if (f1 < f2) {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + invphi * (b - a);
                f2 = f(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - invphi * (b - a);
                f1 = f(x1);
            }
        }
        return std::max(f1, f2);
    }

    static std::string print(const Node& n) {
        switch (n.fam) {
            case Family::LogPower:
                return "logpow(" + format_double(n.p) + ")";
            case Family::Power:
                return "pow(" + format_double(n.p) + ")";
            case Family::Constant:
                return "const(" + format_double(n.p) + ")";
            case Family::Product:
                return "product(" + print(*n.left) + ", " + print(*n.right) + ")";
            case Family::Bracket:
                return "bracket(" + format_double(n.p) + ", " + print(*n.left) + ")";
            case Family::LinearExtended:
                return "linext(" + print(*n.left) + ")";
            case Family::ClassCGamma:
                return "gamma" + std::to_string(static_cast<int>(n.p));
        }
        throw std::logic_error("ModulusFn: unreachable");
    }

    std::shared_ptr<const Node> node_;
};

inline ModulusFn bracket(double alpha, const ModulusFn& base);

namespace detail {

struct Parser {
    std::string_view s;
    size_t pos = 0;

    void skip_ws() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool consume(char c) {
        skip_ws();
        if (pos < s.size() && s[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!consume(c))
            throw std::invalid_argument("ModulusFn::parse: expected '" + std::string(1, c) + "' in '" +
                                        std::string(s) + "'");
    }
    std::string ident() {
        skip_ws();
        const size_t start = pos;
        while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
        if (pos == start) throw std::invalid_argument("ModulusFn::parse: expected name in '" + std::string(s) + "'");
        return std::string(s.substr(start, pos - start));
    }
    // decimal or rational "p/q"
    double number() {
        skip_ws();
        const size_t start = pos;
        while (pos < s.size() && (std::isdigit(static_cast<unsigned char>(s[pos])) || s[pos] == '.' ||
                                  s[pos] == '-' || s[pos] == '+' || s[pos] == 'e' || s[pos] == 'E'))
            ++pos;
        if (pos == start) throw std::invalid_argument("ModulusFn::parse: expected number in '" + std::string(s) + "'");
        double v = std::stod(std::string(s.substr(start, pos - start)));
        skip_ws();
        if (pos < s.size() && s[pos] == '/') {
            ++pos;
            skip_ws();
            const size_t dstart = pos;
            while (pos < s.size() && (std::isdigit(static_cast<unsigned char>(s[pos])) || s[pos] == '.')) ++pos;
            v /= std::stod(std::string(s.substr(dstart, pos - dstart)));
        }
        return v;
    }

    ModulusFn expr() {
        const std::string name = ident();
        if (name == "gamma1") return ModulusFn::class_c_gamma(1);
        if (name == "gamma2") return ModulusFn::class_c_gamma(2);
        if (name == "gamma3") return ModulusFn::class_c_gamma(3);
        expect('(');
        if (name == "logpow") {
            const double b = number();
            expect(')');
            return ModulusFn::log_power(b);
        }
        if (name == "pow") {
            const double a = number();
            expect(')');
            return ModulusFn::power(a);
        }
        if (name == "const") {
            const double c = number();
            expect(')');
            return ModulusFn::constant(c);
        }
        if (name == "bracket") {
            const double a = number();
            expect(',');
            ModulusFn base = expr();
            expect(')');
            return bracket(a, base);
        }
        if (name == "product") {
            ModulusFn l = expr();
            expect(',');
            ModulusFn r = expr();
            expect(')');
            return ModulusFn::product(l, r);
        }
        if (name == "linext") {
            ModulusFn b = expr();
            expect(')');
            return ModulusFn::linear_extended(b);
        }
        throw std::invalid_argument("ModulusFn::parse: unknown family '" + name + "'");
    }
};

}  // namespace detail

inline ModulusFn ModulusFn::parse(std::string_view text) {
    detail::Parser p{text};
    ModulusFn m = p.expr();
    p.skip_ws();
    if (p.pos != text.size())
        throw std::invalid_argument("ModulusFn::parse: trailing input in '" + std::string(text) + "'");
    return m;
}

// phi_[alpha](t) = t^alpha phi(t) on (0,1], c_alpha t beyond, with
// c_alpha = sup_{(0,1]} s^alpha phi(s).
inline ModulusFn bracket(double alpha, const ModulusFn& base) {
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("bracket: alpha must be in [0,1]");
    const double c_alpha = ModulusFn::sup_on_unit(base, alpha);
    return ModulusFn(std::make_shared<ModulusFn::Node>(
        ModulusFn::Node{ModulusFn::Family::Bracket, alpha, c_alpha, base.node_, nullptr}));
}

// --- Dini classification ------------------------------------------------

enum class Verdict { Converges, Diverges, Inconclusive };

struct DiniResult {
    double value = 0.0;          // integral of phi(t)/t over [2^-60, 1]
    Verdict verdict = Verdict::Inconclusive;
    int decision_rung = 0;       // ladder index where the convergence rule fired
    std::vector<double> increments;
};

// Accurate integral of phi(t)/t over [a,b]; log-substituted Gauss panels.
inline double dini_cell(const ModulusFn& phi, double a, double b) {
    return quad::gauss16_log([&](double t) { return phi(t) / t; }, a, b, 2);
}

// Ladder eps_k = 2^-k, k <= 60. Converges once an increment drops below tol;
// diverges when the last 10 increments each exceed half their predecessor
// (geometric non-decay); inconclusive otherwise. The value is the partial
// integral at the deepest rung.
inline DiniResult dini_integral(const ModulusFn& phi, double tol = 1e-3) {
    constexpr int kMax = 60;
    DiniResult r;
    r.increments.reserve(kMax);
    double total = 0.0;
    int converged_at = 0;
    for (int k = 1; k <= kMax; ++k) {
        const double a = std::ldexp(1.0, -k), b = std::ldexp(1.0, -(k - 1));
        const double d = dini_cell(phi, a, b);
        r.increments.push_back(d);
        total += d;
        if (converged_at == 0 && d < tol) converged_at = k;
    }
    r.value = total;
    if (converged_at > 0) {
        r.verdict = Verdict::Converges;
        r.decision_rung = converged_at;
        return r;
    }
    bool nondecay = true;
    for (int k = kMax - 10; k < kMax; ++k) {
        if (!(r.increments[k] > 0.5 * r.increments[k - 1])) {
            nondecay = false;
            break;
        }
    }
    r.verdict = nondecay ? Verdict::Diverges : Verdict::Inconclusive;
    r.decision_rung = kMax;
    return r;
}

// max over probe scales t_k = 2^-k (k = 20..40) and the given lambdas of
// |phi(lambda t)/phi(t) - 1|.
inline double slow_variation_defect(const ModulusFn& phi, const std::vector<double>& lambdas) {
    if (lambdas.empty()) throw std::invalid_argument("slow_variation_defect: lambdas empty");
    double worst = 0.0;
    for (int k = 20; k <= 40; ++k) {
        const double t = std::ldexp(1.0, -k);
        for (double lam : lambdas) {
            if (!(lam > 0)) throw std::invalid_argument("slow_variation_defect: lambda must be > 0");
            worst = std::max(worst, std::abs(phi(lam * t) / phi(t) - 1.0));
        }
    }
    return worst;
}

// --- Empirical constants for the bracket-family inequalities -------------

struct PropertyReport {
    double c_ratio = 0.0;       // psi(t)/psi(s) <= C max((t/s)^(a+d),(t/s)^(a-d))
    double c_monotone = 0.0;    // s/psi(s) <= C t/psi(t), t >= s   (alpha < 1)
    double c_int_lower = 0.0;   // int_0^t psi(s)/s ds <= C psi(t)  (alpha in (0,1))
    double c_int_upper = 0.0;   // int_t^1 psi(s)/s^2 ds <= C psi(t)/t
    double c_subadd = 0.0;      // psi(s+t) <= C (psi(s) + psi(t))
    bool all_finite = true;
    std::vector<std::pair<double, double>> violations;  // pairs whose candidate C exceeded the cap
};

inline std::vector<std::pair<double, double>> default_pair_grid(int n = 25, double lo = 1e-4) {
    std::vector<double> pts(n);
    for (int i = 0; i < n; ++i) pts[i] = lo * std::pow(1.0 / lo, static_cast<double>(i) / (n - 1));
    std::vector<std::pair<double, double>> pairs;
    for (double t : pts)
        for (double s : pts)
            if (t >= s) pairs.emplace_back(t, s);
    return pairs;
}

inline PropertyReport property_suite(const ModulusFn& psi, double alpha, double delta,
                                     const std::vector<std::pair<double, double>>& grid,
                                     double cap = 1e6) {
    PropertyReport rep;
    for (const auto& [t, s] : grid) {
        const double ratio = psi(t) / psi(s);
        const double bound = std::max(std::pow(t / s, alpha + delta), std::pow(t / s, alpha - delta));
        const double c1 = ratio / bound;
        rep.c_ratio = std::max(rep.c_ratio, c1);
        if (c1 > cap) rep.violations.emplace_back(t, s);
        if (alpha < 1.0) {
            const double c2 = (s / psi(s)) / (t / psi(t));
            rep.c_monotone = std::max(rep.c_monotone, c2);
            if (c2 > cap) rep.violations.emplace_back(t, s);
        }
        const double c5 = psi(s + t) / (psi(s) + psi(t));
        rep.c_subadd = std::max(rep.c_subadd, c5);
        if (c5 > cap) rep.violations.emplace_back(t, s);
    }
    if (alpha > 0.0 && alpha < 1.0) {
        for (const auto& [t, s] : grid) {
            (void)s;
            if (!(t <= 1.0)) continue;
            const double i1 = quad::gauss16_log([&](double u) { return psi(u) / u; }, t * 1e-12, t, 2);
            const double i2 =
                t < 1.0 ? quad::gauss16_log([&](double u) { return psi(u) / (u * u); }, t, 1.0, 2) : 0.0;
            rep.c_int_lower = std::max(rep.c_int_lower, i1 / psi(t));
            rep.c_int_upper = std::max(rep.c_int_upper, i2 * t / psi(t));
        }
    }
    rep.all_finite = std::isfinite(rep.c_ratio) && std::isfinite(rep.c_monotone) &&
                     std::isfinite(rep.c_int_lower) && std::isfinite(rep.c_int_upper) &&
                     std::isfinite(rep.c_subadd) && rep.violations.empty();
    return rep;
}

// --- class-C diagnostics --------------------------------------------------

struct ClassCReport {
    double liminf_proxy = 0.0;   // min over the probe ladder of gamma/4 + t gamma'
    bool integral_diverges = false;  // int_0^1 dt/(t gamma(t)) by the ladder rule
};

// t * gamma_level'(t), analytic. Finite differences are ill-conditioned near 0.
inline double gamma_t_derivative(int level, double t) {
    const double g1 = std::log1p(1.0 / t);
    const double tg1p = -1.0 / (1.0 + t);
    if (level == 1) return tg1p;
    const double e = std::exp(1.0);
    const double l2_arg = std::log(e + 1.0 / t);
    const double L2 = std::log(l2_arg);
    const double tL2p = -1.0 / ((e * t + 1.0) * l2_arg);
    const double tg2p = tg1p * L2 + g1 * tL2p;
    if (level == 2) return tg2p;
    const double ee = std::exp(std::exp(1.0));
    const double l3_inner = std::log(ee + 1.0 / t);
    const double l3_mid = std::log(l3_inner);
    const double L3 = std::log(l3_mid);
    const double tL3p = -1.0 / ((ee * t + 1.0) * l3_inner * l3_mid);
    const double g2 = g1 * std::log(l2_arg);
    return tg2p * L3 + g2 * tL3p;
}

inline ClassCReport class_c_report(int level, double tol = 1e-4) {
    if (level < 1 || level > 3) throw std::invalid_argument("class_c_report: level must be 1, 2 or 3");
    const ModulusFn g = ModulusFn::class_c_gamma(level);
    ClassCReport rep;
    // liminf proxy: deep rungs only, the small-t behavior is what matters
    rep.liminf_proxy = std::numeric_limits<double>::infinity();
    for (int k = 20; k <= 45; ++k) {
        const double t = std::ldexp(1.0, -k);
        rep.liminf_proxy = std::min(rep.liminf_proxy, g(t) / 4.0 + gamma_t_derivative(level, t));
    }
    std::vector<double> inc;
    bool small = false;
    for (int k = 1; k <= 60; ++k) {
        const double a = std::ldexp(1.0, -k), b = std::ldexp(1.0, -(k - 1));
        const double d = quad::gauss16_log([&](double t) { return 1.0 / (t * g(t)); }, a, b, 2);
        inc.push_back(d);
        if (d < tol) small = true;
    }
    bool nondecay = true;
    for (size_t k = inc.size() - 10; k < inc.size(); ++k)
        if (!(inc[k] > 0.5 * inc[k - 1])) nondecay = false;
    rep.integral_diverges = !small && nondecay;
    return rep;
}

inline bool nondecreasing_on_unit(const ModulusFn& phi, int n = 10000) {
    double prev = phi(1e-6);
    for (int i = 1; i <= n; ++i) {
        const double t = 1e-6 + (1.0 - 1e-6) * static_cast<double>(i) / n;
        const double v = phi(t);
        if (v < prev * (1.0 - 1e-12)) return false;
        prev = v;
    }
    return true;
}

}  // namespace hamlab::modulus
