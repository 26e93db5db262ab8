#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hamlab/common.hpp"
#include "hamlab/linear_flow.hpp"
#include "hamlab/rng.hpp"
#include "hamlab/stats.hpp"

namespace hamlab::sde_lab {

using linear_flow::McConfig;
using linear_flow::PhaseVector;
using linear_flow::derive_seed;

struct Lyapunov {
    std::function<double(const PhaseVector&)> value;
    std::function<Vec(const PhaseVector&)> grad;    // length d1+d2
    std::function<Mat(const PhaseVector&)> hess22;  // d2 x d2 block
};

struct RegularityMeta {
    double alpha = 1.0;
    double beta = 1.0;
    std::string modulus_tag;
};

// Split-drift degenerate model: noise enters the second block only.
struct SdeModel {
    int d1 = 1, d2 = 1;
    std::function<Vec(double, const PhaseVector&)> b1;
    std::function<Vec(double, const PhaseVector&)> b2;
    std::function<Mat(double, const PhaseVector&)> sigma;
    std::function<Vec(double, const PhaseVector&)> a;          // optional extra drift, d1+d2
    std::function<Mat(double, const PhaseVector&)> drift_jac;  // optional, gradient of b+a
    std::function<std::vector<Mat>(double, const PhaseVector&)> sigma_jac;  // optional, d sigma/dx_m
    std::optional<Lyapunov> H;
    double eps_lyap = 1.0;
    RegularityMeta meta;

    Vec total_drift(double t, const PhaseVector& x) const {
        Vec d(d1 + d2);
        d.head(d1) = b1(t, x);
        d.tail(d2) = b2(t, x);
        if (a) d += a(t, x);
        return d;
    }
};

// One Brownian path stored at the finest dyadic level; coarse increments are
// sums of fine ones, so integrations at different steps share the same noise.
struct BrownianDriver {
    double T = 0.0;
    double h_min = 0.0;
    int n_fine = 0;
    int d2 = 0;
    Mat inc;  // n_fine x d2, each row N(0, h_min I)

    BrownianDriver(uint64_t seed, uint64_t unit, double T_, double h_min_, int d2_)
        : T(T_), h_min(h_min_), d2(d2_) {
        n_fine = static_cast<int>(std::llround(T / h_min));
        if (std::abs(n_fine * h_min - T) > 1e-9 * T)
            throw std::invalid_argument("BrownianDriver: h_min must divide T");
        inc.resize(n_fine, d2);
        rng::NormalStream st(seed, rng::Purpose::brownian, unit);
        const double sd = std::sqrt(h_min);
        for (int i = 0; i < n_fine; ++i)
            for (int j = 0; j < d2; ++j) inc(i, j) = sd * st.next();
    }

    // increment over [k*h, (k+1)*h) with h = stride * h_min
    Vec increment(int k, int stride) const {
        Vec w = Vec::Zero(d2);
        for (int i = k * stride; i < (k + 1) * stride; ++i) w += inc.row(i).transpose();
        return w;
    }
};

struct SamplePath {
    int d1 = 0;
    std::vector<double> times;
    std::vector<Vec> states;     // joined (x1; x2)
    std::vector<Mat> jacobians;  // present when requested
    bool blown_up = false;

    PhaseVector state(int k) const { return PhaseVector::from_joined(d1, states[k]); }
    const Vec& terminal() const { return states.back(); }

    double sup_distance(const SamplePath& o) const {
        const size_t m = std::min(states.size(), o.states.size());
        double d = 0.0;
        for (size_t k = 0; k < m; ++k) d = std::max(d, (states[k] - o.states[k]).norm());
        if (states.size() != o.states.size()) d = std::max(d, 1e10);
        return d;
    }
};

inline constexpr double kBlowupCap = 1e10;

// Euler-Maruyama on the split system; the Jacobian, when requested, follows
// the forward variational recursion.
inline SamplePath integrate(const SdeModel& model, const PhaseVector& x0, double h, double T,
                            const BrownianDriver& driver, bool with_jacobian = false) {
    const int n_steps = static_cast<int>(std::llround(T / h));
    if (std::abs(n_steps * h - T) > 1e-9 * std::max(T, 1.0))
        throw std::invalid_argument("integrate: h must divide T");
    const int stride = static_cast<int>(std::llround(h / driver.h_min));
    if (std::abs(stride * driver.h_min - h) > 1e-12 || stride < 1)
        throw std::invalid_argument("integrate: h must be a multiple of the driver step");
    if (n_steps * stride > driver.n_fine) throw std::invalid_argument("integrate: driver too short");
    if (with_jacobian && !model.drift_jac)
        throw std::invalid_argument("integrate: with_jacobian needs smooth coefficients (drift_jac)");

    const int d = model.d1 + model.d2;
    SamplePath path;
    path.d1 = model.d1;
    path.times.reserve(n_steps + 1);
    path.states.reserve(n_steps + 1);
    path.times.push_back(0.0);
    path.states.push_back(x0.joined());
    Mat jac = Mat::Identity(d, d);
    if (with_jacobian) path.jacobians.push_back(jac);

    Vec z = x0.joined();
    for (int k = 0; k < n_steps; ++k) {
        const double t = k * h;
        const PhaseVector x = PhaseVector::from_joined(model.d1, z);
        const Vec dw = driver.increment(k, stride);
        Vec drift(d);
        drift.head(model.d1) = model.b1(t, x);
        drift.tail(model.d2) = model.b2(t, x);
        if (model.a) drift += model.a(t, x);
        const Mat sg = model.sigma(t, x);

        if (with_jacobian) {
            Mat next = jac + h * (model.drift_jac(t, x) * jac);
            if (model.sigma_jac) {
                const auto sj = model.sigma_jac(t, x);
                for (int m = 0; m < d; ++m)
                    next.block(model.d1, 0, model.d2, d) += (sj[m] * dw) * jac.row(m);
            }
            jac = std::move(next);
            path.jacobians.push_back(jac);
        }

        z += h * drift;
        z.tail(model.d2) += sg * dw;
        path.times.push_back(t + h);
        path.states.push_back(z);
        if (z.norm() > kBlowupCap) {
            path.blown_up = true;
            break;
        }
    }
    return path;
}

// --- presets ----------------------------------------------------------------

namespace detail {
// d/dx of x|x|^{p-1} for a vector argument
inline Mat power_drift_jac(const Vec& x, double p) {
    const int d = static_cast<int>(x.size());
    const double r = x.norm();
    if (r == 0.0) return Mat::Zero(d, d);
    return std::pow(r, p - 1.0) * Mat::Identity(d, d) +
           (p - 1.0) * std::pow(r, p - 3.0) * (x * x.transpose());
}
}  // namespace detail

struct Example11Params {
    int d = 1;
    double alpha = 1.0;
    double c1 = 1.0;
    double c2 = 0.0;  // 0 drops the polynomial perturbation a
    int m = 1;
    Mat sigma;          // d x d invertible; identity when empty
    double mollify = 0.0;  // replace |x|^{alpha-1} by (|x|^2+delta^2)^{(alpha-1)/2}
};

// Hamiltonian example: H = 1 + |x2|^2/2 + c1 |x1|^{alpha+1} + c2 |x1|^{m+1},
// drift b = (x2, -c1(alpha+1) x1 |x1|^{alpha-1}), a = (0, -c2(m+1) x1 |x1|^{m-1}).
inline SdeModel example_1_1(Example11Params p) {
    if (!(p.alpha > 2.0 / 3.0 && p.alpha <= 1.0))
        throw std::invalid_argument("example_1_1: alpha must be in (2/3, 1]");
    if (!(p.c1 > 0) || p.c2 < 0 || p.m < 1) throw std::invalid_argument("example_1_1: bad c1/c2/m");
    if (p.sigma.size() == 0) p.sigma = Mat::Identity(p.d, p.d);
    Eigen::JacobiSVD<Mat> svd(p.sigma);
    if (!(svd.singularValues().minCoeff() > 1e-12))
        throw std::invalid_argument("example_1_1: sigma must be invertible");

    SdeModel m;
    m.d1 = p.d;
    m.d2 = p.d;
    m.eps_lyap = 1.0;
    m.meta = {p.alpha, 1.0, "pow(" + format_double(p.alpha) + ")"};
    const double del2 = p.mollify * p.mollify;
    m.b1 = [](double, const PhaseVector& x) { return x.x2; };
    m.b2 = [p, del2](double, const PhaseVector& x) -> Vec {
        // x |x|^{alpha-1}, |x| smoothed to sqrt(|x|^2 + delta^2); the limit
        // at the origin is 0 for every alpha in (2/3, 1]
        const double q = x.x1.squaredNorm() + del2;
        if (q == 0.0) return Vec::Zero(p.d);
        return -p.c1 * (p.alpha + 1.0) * std::pow(q, 0.5 * (p.alpha - 1.0)) * x.x1;
    };
    if (p.c2 > 0) {
        m.a = [p](double, const PhaseVector& x) -> Vec {
            Vec out = Vec::Zero(2 * p.d);
            const double r = x.x1.norm();
            out.tail(p.d) = -p.c2 * (p.m + 1.0) * (r == 0.0 ? 0.0 : std::pow(r, p.m - 1.0)) * x.x1;
            return out;
        };
    }
    m.sigma = [sg = p.sigma](double, const PhaseVector&) { return sg; };
    if (p.alpha == 1.0 || p.mollify > 0.0) {
        m.drift_jac = [p, del2](double, const PhaseVector& x) {
            const int d = p.d;
            Mat j = Mat::Zero(2 * d, 2 * d);
            j.block(0, d, d, d) = Mat::Identity(d, d);
            Mat g;
            if (p.alpha == 1.0 && p.mollify == 0.0) {
                g = Mat::Identity(d, d);
            } else {
                const double q = x.x1.squaredNorm() + del2;
                g = std::pow(q, 0.5 * (p.alpha - 1.0)) * Mat::Identity(d, d) +
                    (p.alpha - 1.0) * std::pow(q, 0.5 * (p.alpha - 3.0)) * (x.x1 * x.x1.transpose());
            }
            j.block(d, 0, d, d) = -p.c1 * (p.alpha + 1.0) * g;
            if (p.c2 > 0)
                j.block(d, 0, d, d) -=
                    p.c2 * (p.m + 1.0) * detail::power_drift_jac(x.x1, static_cast<double>(p.m));
            return j;
        };
    }
    m.H = Lyapunov{
        [p](const PhaseVector& x) {
            return 1.0 + 0.5 * x.x2.squaredNorm() + p.c1 * std::pow(x.x1.norm(), p.alpha + 1.0) +
                   p.c2 * std::pow(x.x1.norm(), p.m + 1.0);
        },
        [p](const PhaseVector& x) {
            Vec g(2 * p.d);
            const double r = x.x1.norm();
            Vec g1 = Vec::Zero(p.d);
            if (r > 0.0)
                g1 = (p.c1 * (p.alpha + 1.0) * std::pow(r, p.alpha - 1.0) +
                      p.c2 * (p.m + 1.0) * std::pow(r, p.m - 1.0)) *
                     x.x1;
            g.head(p.d) = g1;
            g.tail(p.d) = x.x2;
            return g;
        },
        [p](const PhaseVector&) { return Mat::Identity(p.d, p.d); },
    };
    return m;
}

// Augmented system for dX = (b(X) + int_0^t sigma(X_s) dW_s) dt.
inline SdeModel integral_drift(int d, std::function<Vec(double, const Vec&)> b,
                               std::function<Mat(double, const Vec&)> sigma_of_state) {
    SdeModel m;
    m.d1 = d;
    m.d2 = d;
    m.b1 = [b](double t, const PhaseVector& x) -> Vec { return b(t, x.x1) + x.x2; };
    m.b2 = [d](double, const PhaseVector&) { return Vec::Zero(d); };
    m.sigma = [sigma_of_state](double t, const PhaseVector& x) { return sigma_of_state(t, x.x1); };
    return m;
}

// Augmented system for the unbounded-delay SDE
// dY = b2(int_0^t b1(Y_s) ds, Y) dt + sigma(int_0^t b1(Y_s) ds, Y) dW.
inline SdeModel delay_sde(int d1, int d2, std::function<Vec(double, const Vec&)> b_one,
                          std::function<Vec(double, const Vec&, const Vec&)> b_two,
                          std::function<Mat(double, const Vec&, const Vec&)> sigma) {
    SdeModel m;
    m.d1 = d1;
    m.d2 = d2;
    m.b1 = [b_one](double t, const PhaseVector& x) { return b_one(t, x.x2); };
    m.b2 = [b_two](double t, const PhaseVector& x) { return b_two(t, x.x1, x.x2); };
    m.sigma = [sigma](double t, const PhaseVector& x) { return sigma(t, x.x1, x.x2); };
    return m;
}

// Frozen linear system; oracles delegate to linear_flow.
inline SdeModel linear(const Mat& B, const Mat& sigma) {
    SdeModel m;
    m.d1 = static_cast<int>(B.rows());
    m.d2 = static_cast<int>(B.cols());
    m.b1 = [B](double, const PhaseVector& x) -> Vec { return B * x.x2; };
    m.b2 = [d2 = m.d2](double, const PhaseVector&) { return Vec::Zero(d2); };
    m.sigma = [sigma](double, const PhaseVector&) { return sigma; };
    m.drift_jac = [B, d1 = m.d1, d2 = m.d2](double, const PhaseVector&) {
        Mat j = Mat::Zero(d1 + d2, d1 + d2);
        j.block(0, d1, d1, d2) = B;
        return j;
    };
    return m;
}

// Smooth regularization ladder for the 2/3-Hoelder drift |x1|^{2/3}:
// member k uses (|x1|^2 + delta_k^2)^{1/3} with delta_k = 2^-k.
inline SdeModel holder23_member(int k, double sigma_scale = 1.0) {
    SdeModel m;
    m.d1 = 1;
    m.d2 = 1;
    const double delta2 = std::ldexp(1.0, -k) * std::ldexp(1.0, -k);
    m.meta = {2.0 / 3.0, 1.0, "pow(0.66666666666666663)"};
    m.b1 = [](double, const PhaseVector& x) { return x.x2; };
    m.b2 = [delta2](double, const PhaseVector& x) {
        Vec out(1);
        out(0) = -std::pow(x.x1(0) * x.x1(0) + delta2, 1.0 / 3.0);
        return out;
    };
    m.sigma = [sigma_scale](double, const PhaseVector&) {
        Mat s(1, 1);
        s(0, 0) = sigma_scale;
        return s;
    };
    m.drift_jac = [delta2](double, const PhaseVector& x) {
        Mat j = Mat::Zero(2, 2);
        j(0, 1) = 1.0;
        j(1, 0) = -(2.0 / 3.0) * x.x1(0) * std::pow(x.x1(0) * x.x1(0) + delta2, -2.0 / 3.0);
        return j;
    };
    return m;
}

// --- diagnostics --------------------------------------------------------------

struct LyapunovReport {
    double max_generator_ratio = 0.0;  // |L H| / H over the probe grid
    double max_grad_ratio = 0.0;       // |grad2 H|^2 / H^{2-eps}
    double delta1 = 0.0, delta2 = 0.0; // fitted polynomial sandwich exponents
    bool finite = true;
};

inline LyapunovReport lyapunov_check(const SdeModel& model, const std::vector<PhaseVector>& grid,
                                     const std::vector<double>& times = {0.0, 0.5, 1.0}) {
    if (!model.H) throw std::invalid_argument("lyapunov_check: model has no Lyapunov function");
    const auto& H = *model.H;
    LyapunovReport rep;
    for (const auto& x : grid) {
        const double hv = H.value(x);
        if (!(hv >= 1.0)) rep.finite = false;
        const Vec g = H.grad(x);
        const double grad2_sq = g.tail(model.d2).squaredNorm();
        rep.max_grad_ratio =
            std::max(rep.max_grad_ratio, grad2_sq / std::pow(hv, 2.0 - model.eps_lyap));
        for (double t : times) {
            const Mat sg = model.sigma(t, x);
            const Mat Sig = 0.5 * sg * sg.transpose();
            const double gen = (Sig * H.hess22(x)).trace() + model.total_drift(t, x).dot(g);
            rep.max_generator_ratio = std::max(rep.max_generator_ratio, std::abs(gen) / hv);
        }
    }
    // polynomial sandwich along radial rays
    rng::NormalStream st(7, rng::Purpose::generic, 0);
    double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
    const int d = model.d1 + model.d2;
    for (int ray = 0; ray < 8; ++ray) {
        Vec u(d);
        for (int i = 0; i < d; ++i) u(i) = st.next();
        u.normalize();
        std::vector<double> lr, lh;
        for (int j = 0; j <= 10; ++j) {
            const double r = std::pow(10.0, 0.0 + j * 0.1);  // radii 1..10
            lr.push_back(std::log(r));
            lh.push_back(std::log(H.value(PhaseVector::from_joined(model.d1, (r * u).eval()))));
        }
        const double slope = fit_line(lr, lh).slope;
        dmin = std::min(dmin, slope);
        dmax = std::max(dmax, slope);
    }
    rep.delta1 = dmin;
    rep.delta2 = dmax;
    rep.finite = rep.finite && std::isfinite(rep.max_generator_ratio) &&
                 std::isfinite(rep.max_grad_ratio);
    return rep;
}

struct MomentDiag {
    double estimate = 0.0;     // E exp(min(cap, sup_t H^{eps'}))
    double se = 0.0;
    double cap_hit_rate = 0.0;
    double q50 = 0.0, q90 = 0.0, q99 = 0.0;  // quantiles of sup_t H
    double flag_rate = 0.0;
};

inline MomentDiag moment_diag(const SdeModel& model, const PhaseVector& x0, double T,
                              double eps_prime, const McConfig& mc, double h, double cap = 30.0) {
    if (!model.H) throw std::invalid_argument("moment_diag: model has no Lyapunov function");
    if (!(eps_prime < model.eps_lyap))
        throw std::invalid_argument("moment_diag: eps' must be below the model's eps");
    const uint64_t sd = derive_seed(mc.seed, mc.stream_salt);
    std::vector<double> sups(mc.n);
    struct Block {
        stats::Accum acc;
        std::size_t hits = 0, flags = 0;
    };
    auto blocks = par::run_blocks<Block>(mc.n, mc.threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
        Block blk;
        for (std::size_t i = lo; i < hi; ++i) {
            BrownianDriver driver(sd, i, T, h, model.d2);
            const SamplePath path = integrate(model, x0, h, T, driver);
            double sup_h = 0.0;
            for (const auto& z : path.states)
                sup_h = std::max(sup_h, model.H->value(PhaseVector::from_joined(model.d1, z)));
            sups[i] = sup_h;
            const double e = std::pow(sup_h, eps_prime);
            blk.acc.add(std::exp(std::min(cap, e)));
            if (e >= cap) ++blk.hits;
            if (path.blown_up) ++blk.flags;
        }
        return blk;
    });
    stats::Accum total;
    std::size_t hits = 0, flags = 0;
    for (const auto& b : blocks) {
        total.merge(b.acc);
        hits += b.hits;
        flags += b.flags;
    }
    std::sort(sups.begin(), sups.end());
    auto q = [&](double p) { return sups[std::min(sups.size() - 1, static_cast<size_t>(p * sups.size()))]; };
    return {total.mean(), total.stderr_mean(), static_cast<double>(hits) / mc.n,
            q(0.5),       q(0.9),              q(0.99),
            static_cast<double>(flags) / mc.n};
}

struct StabilityLadder {
    std::vector<int> k;
    std::vector<double> p;   // exceedance probability vs the most regular member
    std::vector<double> se;  // binomial
    double flag_rate = 0.0;
};

// P(sup_t |X^k - X^proxy| >= eps) with one shared driver per sample across all
// family members; the limit model is proxied by member k_max + 2.
inline StabilityLadder stability_experiment(const std::function<SdeModel(int)>& family,
                                            const PhaseVector& x0, double T, double eps,
                                            const McConfig& mc, const std::vector<int>& k_list,
                                            double h) {
    if (k_list.empty()) throw std::invalid_argument("stability_experiment: empty k list");
    for (size_t i = 1; i < k_list.size(); ++i)
        if (k_list[i] <= k_list[i - 1])
            throw std::invalid_argument("stability_experiment: k_list must ascend");
    const int k_proxy = k_list.back() + 2;
    const SdeModel proxy = family(k_proxy);
    std::vector<SdeModel> members;
    for (int k : k_list) members.push_back(family(k));

    struct Block {
        std::vector<std::size_t> exceed;
        std::size_t flags = 0;
    };
    const uint64_t sd = derive_seed(mc.seed, mc.stream_salt);
    auto blocks = par::run_blocks<Block>(mc.n, mc.threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
        Block blk;
        blk.exceed.assign(k_list.size(), 0);
        for (std::size_t i = lo; i < hi; ++i) {
            BrownianDriver driver(sd, i, T, h, proxy.d2);
            const SamplePath ref = integrate(proxy, x0, h, T, driver);
            if (ref.blown_up) ++blk.flags;
            for (size_t m = 0; m < members.size(); ++m) {
                const SamplePath pk = integrate(members[m], x0, h, T, driver);
                if (pk.sup_distance(ref) >= eps) ++blk.exceed[m];
            }
        }
        return blk;
    });
    StabilityLadder lad;
    lad.k = k_list;
    std::vector<std::size_t> exceed(k_list.size(), 0);
    std::size_t flags = 0;
    for (const auto& b : blocks) {
        for (size_t m = 0; m < exceed.size(); ++m) exceed[m] += b.exceed[m];
        flags += b.flags;
    }
    for (size_t m = 0; m < exceed.size(); ++m) {
        const double p = static_cast<double>(exceed[m]) / mc.n;
        lad.p.push_back(p);
        lad.se.push_back(stats::binomial_stderr(p, mc.n));
    }
    lad.flag_rate = static_cast<double>(flags) / mc.n;
    return lad;
}

struct GapLadder {
    std::vector<double> h;
    std::vector<double> gap;  // E sup_t |X^h - X^{h/2}|
    std::vector<double> se;
    std::vector<double> flag_rate;
    LineFit order;            // fitted strong order
};

inline GapLadder pathwise_gap(const SdeModel& model, const PhaseVector& x0, double T,
                              const std::vector<double>& h_ladder, const McConfig& mc) {
    for (size_t i = 1; i < h_ladder.size(); ++i)
        if (!(h_ladder[i] < h_ladder[i - 1]))
            throw std::invalid_argument("pathwise_gap: h ladder must descend");
    const double h_min = h_ladder.back() / 2.0;
    const uint64_t sd = derive_seed(mc.seed, mc.stream_salt);
    GapLadder lad;
    for (double h : h_ladder) {
        struct Block {
            stats::Accum acc;
            std::size_t flags = 0;
        };
        auto blocks =
            par::run_blocks<Block>(mc.n, mc.threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
                Block blk;
                for (std::size_t i = lo; i < hi; ++i) {
                    BrownianDriver driver(sd, i, T, h_min, model.d2);
                    const SamplePath coarse = integrate(model, x0, h, T, driver);
                    const SamplePath fine = integrate(model, x0, h / 2.0, T, driver);
                    double d = 0.0;
                    for (size_t k = 0; k < coarse.states.size() && 2 * k < fine.states.size(); ++k)
                        d = std::max(d, (coarse.states[k] - fine.states[2 * k]).norm());
                    blk.acc.add(d);
                    if (coarse.blown_up || fine.blown_up) ++blk.flags;
                }
                return blk;
            });
        stats::Accum est;
        std::size_t flags = 0;
        for (const auto& b : blocks) {
            est.merge(b.acc);
            flags += b.flags;
        }
        lad.h.push_back(h);
        lad.gap.push_back(est.mean());
        lad.se.push_back(est.stderr_mean());
        lad.flag_rate.push_back(static_cast<double>(flags) / mc.n);
    }
    std::vector<double> lx, ly;
    for (size_t i = 0; i < lad.h.size(); ++i) {
        lx.push_back(std::log(lad.h[i]));
        ly.push_back(std::log(std::max(lad.gap[i], 1e-300)));
    }
    lad.order = fit_line(lx, ly);
    return lad;
}

}  // namespace hamlab::sde_lab
