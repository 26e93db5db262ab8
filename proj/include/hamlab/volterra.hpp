#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "hamlab/common.hpp"
#include "hamlab/modulus.hpp"
#include "hamlab/quad.hpp"

namespace hamlab::volterra {

// Uniform midpoint grid on [0,T] carrying the convolution kernel
// a1(t) = phi(t)/t, its convolution powers and their sum (the resolvent of
// the renewal identity a = a1 + a*a1).
struct KernelGrid {
    double T = 0.0;
    int n_steps = 0;
    double h = 0.0;
    Vec a1;                       // per-cell averages of phi(t)/t
    std::vector<Vec> iterates;    // a_1, a_2, ... at midpoints
    Vec resolvent;                // sum of iterates
    double renewal_residual = 0.0;
    double l1_tail = 0.0;         // L1 norm of the last accumulated iterate
    double midpoint(int i) const { return (i + 0.5) * h; }
};

namespace detail {

// Piecewise-constant (cell) convolution evaluated at midpoints. Second-order
// accurate; exact when both factors are constant.
inline Vec convolve(const Vec& f, const Vec& g, double h) {
    const Eigen::Index n = f.size();
    Vec c(n);
    for (Eigen::Index m = 0; m < n; ++m) {
        double acc = f(0) * g(m);
        for (Eigen::Index k = 0; k < m; ++k) acc += (f(m - k) + f(m - k - 1)) * g(k);
        c(m) = 0.5 * h * acc;
    }
    return c;
}

// Cell average of w(t)*phi(t)/t over [a,b]; the first cell starts at a
// truncated lower end so the integrable singularity at 0 is never sampled.
template <class W>
double cell_average(const modulus::ModulusFn& phi, W weight, double a, double b) {
    const double lo = a > 0.0 ? a : b * std::ldexp(1.0, -60);
    const double val = quad::gauss16_log([&](double t) { return weight(t) * phi(t) / t; }, lo, b, 2);
    return val / (b - a);
}

}  // namespace detail

inline KernelGrid resolvent(const modulus::ModulusFn& phi, double T, int n_steps,
                            double l1_tol = 1e-10, int iterate_cap = 200) {
    if (!(T > 0)) throw std::invalid_argument("resolvent: T must be > 0");
    if (n_steps < 64) throw std::invalid_argument("resolvent: n_steps must be >= 64");
    const auto dini = modulus::dini_integral(phi);
    if (dini.verdict != modulus::Verdict::Converges)
        throw std::invalid_argument("resolvent: phi is not a Dini function (ladder verdict)");

    KernelGrid kg;
    kg.T = T;
    kg.n_steps = n_steps;
    kg.h = T / n_steps;
    kg.a1.resize(n_steps);
    for (int j = 0; j < n_steps; ++j)
        kg.a1(j) = detail::cell_average(phi, [](double) { return 1.0; }, j * kg.h, (j + 1) * kg.h);

    kg.iterates.push_back(kg.a1);
    kg.resolvent = kg.a1;
    for (int it = 1; it <= iterate_cap; ++it) {
        Vec next = detail::convolve(kg.iterates.back(), kg.a1, kg.h);
        kg.iterates.push_back(next);
        kg.resolvent += next;
        kg.l1_tail = kg.h * next.cwiseAbs().sum();
        if (kg.l1_tail < l1_tol) break;
        if (it == iterate_cap)
            throw std::runtime_error("resolvent: iterate sum did not reach the L1 tail tolerance");
    }
    const Vec again = detail::convolve(kg.resolvent, kg.a1, kg.h);
    kg.renewal_residual = (kg.resolvent - kg.a1 - again).cwiseAbs().maxCoeff();
    return kg;
}

// Empirical constant in a(t) <= C a1(t).
inline double check_domination(const KernelGrid& kg) {
    double c = 0.0;
    for (int j = 0; j < kg.n_steps; ++j) c = std::max(c, kg.resolvent(j) / kg.a1(j));
    return c;
}

namespace detail {
inline double interp_midpoints(const Vec& v, double h, double t) {
    const double u = t / h - 0.5;
    if (u <= 0.0) return v(0);
    const int i = static_cast<int>(u);
    if (i + 1 >= v.size()) return v(v.size() - 1);
    const double w = u - i;
    return (1.0 - w) * v(i) + w * v(i + 1);
}
}  // namespace detail

// max over stored iterates n and grid times t of a_n(r t) * r / a_n(t);
// at most 1 + quadrature slack when phi is increasing. The first two cells
// are excluded: their stored values are cell averages of a singular kernel
// and cannot be read pointwise.
inline double scaling_check(const KernelGrid& kg, double r, int max_iterates = 10) {
    if (!(r > 0 && r < 1)) throw std::invalid_argument("scaling_check: r must be in (0,1)");
    double worst = 0.0;
    const int n_it = std::min<int>(max_iterates, static_cast<int>(kg.iterates.size()));
    for (int n = 0; n < n_it; ++n) {
        const Vec& an = kg.iterates[n];
        for (int j = 0; j < kg.n_steps; ++j) {
            const double t = kg.midpoint(j);
            if (r * t < kg.midpoint(2)) continue;
            const double val = detail::interp_midpoints(an, kg.h, r * t) * r / an(j);
            worst = std::max(worst, val);
        }
    }
    return worst;
}

// Right-hand side of the Volterra-Gronwall bound:
// C * int_0^t exp(-lambda (t-s)) phi(t-s)/(t-s) f(s) ds, sampled at midpoints,
// with C the empirical domination constant for this phi and horizon.
inline Vec gronwall_solve(const Vec& f, const modulus::ModulusFn& phi, double lambda, double T) {
    const int n = static_cast<int>(f.size());
    if (n < 64) throw std::invalid_argument("gronwall_solve: need >= 64 samples");
    if (f.minCoeff() < 0.0) throw std::invalid_argument("gronwall_solve: f must be nonnegative");
    const double h = T / n;
    Vec kernel(n);
    for (int j = 0; j < n; ++j)
        kernel(j) = detail::cell_average(
            phi, [&](double t) { return std::exp(-lambda * t); }, j * h, (j + 1) * h);
    const KernelGrid kg = resolvent(phi, T, n);
    const double c = check_domination(kg);
    return c * detail::convolve(kernel, f, h);
}

inline void write_csv(const KernelGrid& kg, const std::string& path) {
    ensure_parent_dir(path);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path);
    out << "t,a1,a,ratio\n";
    for (int j = 0; j < kg.n_steps; ++j) {
        out << format_double(kg.midpoint(j)) << ',' << format_double(kg.a1(j)) << ','
            << format_double(kg.resolvent(j)) << ',' << format_double(kg.resolvent(j) / kg.a1(j))
            << '\n';
    }
}

}  // namespace hamlab::volterra
