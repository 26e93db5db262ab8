#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "hamlab/common.hpp"
#include "hamlab/modulus.hpp"

namespace hamlab::heat_probe {

enum class GrowthTag { bounded, polynomial };

// Uniform grid sample of a function on [-L,L]^dim, n points per axis, n odd
// so the center point exists. Values row-major for dim == 2.
struct GridFunction {
    int dim = 1;
    int n = 0;
    double L = 0.0;
    GrowthTag growth = GrowthTag::bounded;
    std::vector<double> v;

    GridFunction(int dim_, int n_, double L_, GrowthTag tag)
        : dim(dim_), n(n_), L(L_), growth(tag) {
        if (dim != 1 && dim != 2) throw std::invalid_argument("GridFunction: dim must be 1 or 2");
        if (n < 129 || n % 2 == 0) throw std::invalid_argument("GridFunction: n must be odd and >= 129");
        if (dim == 2 && n > 1025) throw std::invalid_argument("GridFunction: 2D grids capped at 1025 per axis");
        if (!(L > 0)) throw std::invalid_argument("GridFunction: L must be > 0");
        v.assign(dim == 1 ? n : static_cast<size_t>(n) * n, 0.0);
    }

    double dx() const { return 2.0 * L / (n - 1); }
    double coord(int i) const { return -L + i * dx(); }

    double at(int i) const { return v[static_cast<size_t>(i)]; }
    double& at(int i) { return v[static_cast<size_t>(i)]; }
    double at(int i, int j) const { return v[static_cast<size_t>(i) * n + j]; }
    double& at(int i, int j) { return v[static_cast<size_t>(i) * n + j]; }

    double sup_norm() const {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }

    static GridFunction sample_1d(int n, double L, const std::function<double(double)>& f,
                                  GrowthTag tag = GrowthTag::bounded) {
        GridFunction g(1, n, L, tag);
        for (int i = 0; i < n; ++i) g.at(i) = f(g.coord(i));
        return g;
    }
    static GridFunction sample_2d(int n, double L, const std::function<double(double, double)>& f,
                                  GrowthTag tag = GrowthTag::bounded) {
        GridFunction g(2, n, L, tag);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) g.at(i, j) = f(g.coord(i), g.coord(j));
        return g;
    }
};

namespace detail {

// Analytic 1D Gaussian kernel derivatives; k space order, j theta order.
inline double kernel_deriv(double z, double theta, int k, int j) {
    const double p = std::exp(-z * z / (2.0 * theta)) / std::sqrt(2.0 * kPi * theta);
    if (k == 0 && j == 0) return p;
    if (k == 1 && j == 0) return -(z / theta) * p;
    if (k == 0 && j == 1) return p * (z * z / (2.0 * theta * theta) - 1.0 / (2.0 * theta));
    if (k == 1 && j == 1) return p * z * (1.5 / (theta * theta) - z * z / (2.0 * theta * theta * theta));
    throw std::invalid_argument("kernel_deriv: k and j must be 0 or 1");
}

// Truncated kernel weights; tail beyond 8 sqrt(theta) is below 1e-14.
inline std::vector<double> kernel_weights(double theta, double dx, int k, int j, int& radius) {
    radius = static_cast<int>(std::ceil(8.0 * std::sqrt(theta) / dx));
    std::vector<double> w(2 * radius + 1);
    for (int m = -radius; m <= radius; ++m) w[m + radius] = kernel_deriv(m * dx, theta, k, j) * dx;
    return w;
}

// Sample with a linear-extrapolation pad; the target test functions have
// at-most-linear growth.
inline double padded_1d(const GridFunction& f, int i) {
    if (i < 0) return f.at(0) + i * (f.at(1) - f.at(0));
    if (i >= f.n) return f.at(f.n - 1) + (i - f.n + 1) * (f.at(f.n - 1) - f.at(f.n - 2));
    return f.at(i);
}

inline double padded_2d(const GridFunction& f, int i, int j) {
    const int ic = std::clamp(i, 0, f.n - 1), jc = std::clamp(j, 0, f.n - 1);
    double val = f.at(ic, jc);
    if (i != ic) {
        const int i2 = ic == 0 ? 1 : f.n - 2;
        val += (i - ic) * (f.at(ic, jc) - f.at(i2, jc)) * (ic == 0 ? -1.0 : 1.0);
    }
    if (j != jc) {
        const int j2 = jc == 0 ? 1 : f.n - 2;
        val += (j - jc) * (f.at(ic, jc) - f.at(ic, j2)) * (jc == 0 ? -1.0 : 1.0);
    }
    return val;
}

inline void guard_resolution(const GridFunction& f, double theta) {
    if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("heat: theta must be in (0,1]");
    if (std::sqrt(theta) < 2.0 * f.dx())
        throw std::invalid_argument("heat: resolution guard violated (sqrt(theta) < 2 dx)");
}

inline GridFunction conv_axis(const GridFunction& f, const std::vector<double>& w, int radius,
                              int axis) {
    GridFunction out = f;
    if (f.dim == 1) {
        for (int i = 0; i < f.n; ++i) {
            double acc = 0.0;
            for (int m = -radius; m <= radius; ++m) acc += w[m + radius] * padded_1d(f, i - m);
            out.at(i) = acc;
        }
        return out;
    }
    for (int i = 0; i < f.n; ++i) {
        for (int j = 0; j < f.n; ++j) {
            double acc = 0.0;
            if (axis == 1) {
                for (int m = -radius; m <= radius; ++m) acc += w[m + radius] * padded_2d(f, i - m, j);
            } else {
                for (int m = -radius; m <= radius; ++m) acc += w[m + radius] * padded_2d(f, i, j - m);
            }
            out.at(i, j) = acc;
        }
    }
    return out;
}

}  // namespace detail

// Axis-wise convolution on a 2D grid (or the only axis of a 1D grid).
inline GridFunction heat_axis(const GridFunction& f, double theta, int axis, int k = 0, int j = 0) {
    detail::guard_resolution(f, theta);
    if (axis != 1 && axis != 2) throw std::invalid_argument("heat_axis: axis must be 1 or 2");
    if (f.dim == 1 && axis != 1) throw std::invalid_argument("heat_axis: 1D grid has only axis 1");
    int radius = 0;
    const auto w = detail::kernel_weights(theta, f.dx(), k, j, radius);
    return detail::conv_axis(f, w, radius, axis);
}

// nabla^k d_theta^j P_theta f with the analytic kernel derivative. In 2D only
// k = 0 is supported here; axis derivatives go through heat_axis.
inline GridFunction heat_apply(const GridFunction& f, double theta, int k, int j) {
    detail::guard_resolution(f, theta);
    if (f.dim == 1) {
        int radius = 0;
        const auto w = detail::kernel_weights(theta, f.dx(), k, j, radius);
        return detail::conv_axis(f, w, radius, 1);
    }
    if (k != 0) throw std::invalid_argument("heat_apply: 2D gradient goes through heat_axis");
    if (j == 0) {
        GridFunction tmp = heat_axis(f, theta, 1, 0, 0);
        return heat_axis(tmp, theta, 2, 0, 0);
    }
    // product rule for the theta derivative of the tensor kernel
    GridFunction a = heat_axis(heat_axis(f, theta, 1, 0, 1), theta, 2, 0, 0);
    GridFunction b = heat_axis(heat_axis(f, theta, 1, 0, 0), theta, 2, 0, 1);
    for (size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
    return a;
}

namespace detail {

struct PairMax {
    double value = 0.0;
    int i = 0, j = 0;     // indices of the arg-max pair
};

inline PairMax scan_pairs_1d(const GridFunction& f, const modulus::ModulusFn& psi, int stride,
                             int lo, int hi) {
    PairMax best;
    const double dx = f.dx();
    const int max_sep = static_cast<int>(std::floor(1.0 / dx + 1e-9));
    for (int i = lo; i < hi; i += stride) {
        for (int k = stride; k <= max_sep; k += stride) {
            const int j = i + k;
            if (j >= f.n) break;
            const double r = std::abs(f.at(i) - f.at(j)) / psi(k * dx);
            if (r > best.value) best = {r, i, j};
        }
    }
    return best;
}

}  // namespace detail

// [f]_psi = sup_{|x-y|<=1} |f(x)-f(y)| / psi(|x-y|). Two-scale maximization:
// all pairs at a coarse stride, then stride-1 refinement around the argmax.
inline double seminorm(const GridFunction& f, const modulus::ModulusFn& psi) {
    const double dx = f.dx();
    if (f.dim == 1) {
        int stride = 1;
        while ((f.n - 1) % (stride * 2) == 0 && (f.n - 1) / stride > 256) stride *= 2;
        auto coarse = detail::scan_pairs_1d(f, psi, stride, 0, f.n);
        if (stride == 1) return coarse.value;
        double best = coarse.value;
        const int w = 2 * stride;
        const int lo = std::max(0, coarse.i - w), hi = std::min(f.n, coarse.i + w + 1);
        const int max_sep = static_cast<int>(std::floor(1.0 / dx + 1e-9));
        for (int i = lo; i < hi; ++i) {
            for (int k = 1; k <= max_sep; ++k) {
                const int j = i + k;
                if (j >= f.n) break;
                best = std::max(best, std::abs(f.at(i) - f.at(j)) / psi(k * dx));
            }
        }
        return best;
    }
    // 2D: coarse double loop over point pairs within distance 1, then refine.
    int stride = 1;
    while ((f.n - 1) % (stride * 2) == 0 && (f.n - 1) / stride > 64) stride *= 2;
    double best = 0.0;
    int bi = 0, bj = 0, bi2 = 0, bj2 = 0;
    const int max_sep = static_cast<int>(std::floor(1.0 / dx + 1e-9));
    auto scan = [&](int s, int ilo, int ihi, int jlo, int jhi) {
        for (int i = ilo; i < ihi; i += s)
            for (int j = jlo; j < jhi; j += s)
                for (int di = 0; di <= max_sep; di += s) {
                    if (i + di >= f.n) break;
                    for (int dj = (di == 0 ? s : -max_sep); dj <= max_sep; dj += s) {
                        const int j2 = j + dj;
                        if (j2 < 0 || j2 >= f.n) continue;
                        const double dist = dx * std::sqrt(double(di) * di + double(dj) * dj);
                        if (dist > 1.0 + 1e-12 || dist == 0.0) continue;
                        const double r = std::abs(f.at(i, j) - f.at(i + di, j2)) / psi(dist);
                        if (r > best) {
                            best = r;
                            bi = i;
                            bj = j;
                            bi2 = i + di;
                            bj2 = j2;
                        }
                    }
                }
    };
    scan(stride, 0, f.n, 0, f.n);
    if (stride > 1) {
        const int w = stride;
        scan(1, std::max(0, std::min(bi, bi2) - w), std::min(f.n, std::max(bi, bi2) + w + 1),
             std::max(0, std::min(bj, bj2) - w), std::min(f.n, std::max(bj, bj2) + w + 1));
    }
    return best;
}

// Axis-restricted seminorms on 2D grids: pairs differing in one coordinate.
inline double seminorm_axis(const GridFunction& f, const modulus::ModulusFn& psi, int axis) {
    if (f.dim != 2) throw std::invalid_argument("seminorm_axis: need a 2D grid");
    const double dx = f.dx();
    const int max_sep = static_cast<int>(std::floor(1.0 / dx + 1e-9));
    double best = 0.0;
    for (int fixed = 0; fixed < f.n; ++fixed)
        for (int i = 0; i < f.n; ++i)
            for (int k = 1; k <= max_sep && i + k < f.n; ++k) {
                const double num = axis == 1 ? std::abs(f.at(i, fixed) - f.at(i + k, fixed))
                                             : std::abs(f.at(fixed, i) - f.at(fixed, i + k));
                best = std::max(best, num / psi(k * dx));
            }
    return best;
}

struct ModulusEstimate {
    double value = 0.0;     // ||f||_inf + sup over the admissible ladder
    double sup_term = 0.0;
    std::vector<std::pair<double, double>> ladder;  // (theta, theta ||d_theta P_theta f|| / phi(sqrt theta))
    bool divergent = false;
};

// Heat-semigroup modulus estimator. A function rougher than phi shows up as a
// ladder term that keeps growing as theta decreases.
inline ModulusEstimate modulus_estimate(const GridFunction& f, const modulus::ModulusFn& phi,
                                        const std::vector<double>& theta_ladder) {
    ModulusEstimate res;
    for (double theta : theta_ladder) {
        if (!(theta > 0.0 && theta <= 1.0)) continue;
        if (std::sqrt(theta) < 2.0 * f.dx()) continue;  // admissible ladder only
        const GridFunction d = heat_apply(f, theta, 0, 1);
        const double term = theta * d.sup_norm() / phi(std::sqrt(theta));
        res.ladder.emplace_back(theta, term);
        res.sup_term = std::max(res.sup_term, term);
    }
    if (res.ladder.empty()) throw std::invalid_argument("modulus_estimate: no admissible theta");
    res.value = f.sup_norm() + res.sup_term;
    std::sort(res.ladder.begin(), res.ladder.end(),
              [](auto a, auto b) { return a.first > b.first; });
    const size_t m = res.ladder.size();
    if (m >= 4) {
        bool tail_increasing = true;
        for (size_t k = m - 3; k < m; ++k)
            if (!(res.ladder[k].second > res.ladder[k - 1].second * 1.02)) tail_increasing = false;
        const double growth = res.ladder.back().second / res.ladder.front().second;
        res.divergent = tail_increasing && growth > 2.0;
    }
    return res;
}

struct CommutatorResult {
    GridFunction field;      // d_theta P_theta (f g) - f d_theta P_theta g
    double seminorm_psi = 0.0;
    double implied_c = 0.0;  // seminorm * theta / ([f]_{psi phi} ||g||_inf phi(sqrt theta))
};

inline CommutatorResult commutator(const GridFunction& f, const GridFunction& g, double theta,
                                   const modulus::ModulusFn& psi, const modulus::ModulusFn& phi,
                                   double f_seminorm_psiphi = -1.0) {
    if (f.dim != g.dim || f.n != g.n || f.L != g.L)
        throw std::invalid_argument("commutator: grid mismatch");
    GridFunction fg = f;
    for (size_t i = 0; i < fg.v.size(); ++i) fg.v[i] = f.v[i] * g.v[i];
    const GridFunction lhs = heat_apply(fg, theta, 0, 1);
    const GridFunction pg = heat_apply(g, theta, 0, 1);
    CommutatorResult r{f, 0.0, 0.0};
    for (size_t i = 0; i < r.field.v.size(); ++i) r.field.v[i] = lhs.v[i] - f.v[i] * pg.v[i];
    r.seminorm_psi = seminorm(r.field, psi);
    const double bracket_f =
        f_seminorm_psiphi > 0 ? f_seminorm_psiphi : seminorm(f, modulus::ModulusFn::product(psi, phi));
    r.implied_c = r.seminorm_psi * theta / (bracket_f * g.sup_norm() * phi(std::sqrt(theta)));
    return r;
}

// Implied-constant ladder across thetas; bounded when the commutator bound holds.
inline std::vector<std::pair<double, double>> commutator_ladder(const GridFunction& f,
                                                                const GridFunction& g,
                                                                const std::vector<double>& thetas,
                                                                const modulus::ModulusFn& psi,
                                                                const modulus::ModulusFn& phi) {
    const double bracket_f = seminorm(f, modulus::ModulusFn::product(psi, phi));
    std::vector<std::pair<double, double>> out;
    for (double theta : thetas) {
        if (std::sqrt(theta) < 2.0 * f.dx()) continue;
        out.emplace_back(theta, commutator(f, g, theta, psi, phi, bracket_f).implied_c);
    }
    return out;
}

inline void write_grid(const GridFunction& f, const std::string& path) {
    ensure_parent_dir(path);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_grid: cannot open " + path);
    out << f.dim << ' ' << f.n << ' ' << format_double(f.L) << ' '
        << (f.growth == GrowthTag::bounded ? "bounded" : "polynomial") << '\n';
    for (size_t i = 0; i < f.v.size(); ++i) out << format_double(f.v[i]) << (i + 1 == f.v.size() ? '\n' : ' ');
}

inline GridFunction read_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_grid: cannot open " + path);
    int dim, n;
    double L;
    std::string tag;
    if (!(in >> dim >> n >> L >> tag)) throw std::runtime_error("read_grid: bad header");
    GridFunction f(dim, n, L, tag == "polynomial" ? GrowthTag::polynomial : GrowthTag::bounded);
    for (size_t i = 0; i < f.v.size(); ++i)
        if (!(in >> f.v[i])) throw std::runtime_error("read_grid: truncated values");
    return f;
}

}  // namespace hamlab::heat_probe
