#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hamlab/common.hpp"
#include "hamlab/modulus.hpp"
#include "hamlab/quad.hpp"
#include "hamlab/sde_lab.hpp"

namespace hamlab::zvonkin {

using linear_flow::McConfig;
using linear_flow::PhaseVector;
using sde_lab::BrownianDriver;
using sde_lab::SdeModel;

// Tensor grid over a user-declared hull with multilinear interpolation.
struct GridSpec {
    Vec lo, hi;
    std::vector<int> npts;

    int dim() const { return static_cast<int>(lo.size()); }
    std::size_t total() const {
        std::size_t t = 1;
        for (int n : npts) t *= static_cast<std::size_t>(n);
        return t;
    }
    double spacing(int m) const { return (hi(m) - lo(m)) / (npts[m] - 1); }

    Vec node(std::size_t flat) const {
        Vec x(dim());
        for (int m = dim() - 1; m >= 0; --m) {
            const int i = static_cast<int>(flat % npts[m]);
            x(m) = lo(m) + i * spacing(m);
            flat /= npts[m];
        }
        return x;
    }

    bool contains(const Vec& y, double slack = 1e-9) const {
        for (int m = 0; m < dim(); ++m)
            if (y(m) < lo(m) - slack || y(m) > hi(m) + slack) return false;
        return true;
    }

    // multilinear interpolation of per-node data supplied by get(flat_index)
    template <class Getter>
    auto interp(const Getter& get, const Vec& y) const
        -> std::decay_t<decltype(get(std::size_t{0}))> {
        if (!contains(y)) throw std::out_of_range("GridSpec: evaluation outside interpolation hull");
        const int d = dim();
        std::vector<int> base(d);
        std::vector<double> w(d);
        for (int m = 0; m < d; ++m) {
            const double u = (y(m) - lo(m)) / spacing(m);
            int i = static_cast<int>(std::floor(u));
            i = std::clamp(i, 0, npts[m] - 2);
            base[m] = i;
            w[m] = std::clamp(u - i, 0.0, 1.0);
        }
        auto flat_of = [&](const std::vector<int>& idx) {
            std::size_t f = 0;
            for (int m = 0; m < d; ++m) f = f * npts[m] + idx[m];
            return f;
        };
        std::decay_t<decltype(get(std::size_t{0}))> out = get(flat_of(base));
        out.setZero();
        const int corners = 1 << d;
        std::vector<int> idx(d);
        for (int c = 0; c < corners; ++c) {
            double weight = 1.0;
            for (int m = 0; m < d; ++m) {
                const int bit = (c >> m) & 1;
                idx[m] = base[m] + bit;
                weight *= bit ? w[m] : 1.0 - w[m];
            }
            out += weight * get(flat_of(idx));
        }
        return out;
    }
};

enum class GradMethod { none, crn_fd, jacobian_flow };

// u_{T-t}(x) and its gradient sampled on a grid for a ladder of
// times-to-horizon tau; u(tau=0) = 0 identically by construction.
struct TransformField {
    double T = 0.0;
    double lambda = 0.0;
    GridSpec grid;
    std::vector<double> taus;                // ascending, values in (0, T]
    std::vector<std::vector<Vec>> u;         // [tau][node] -> R^d
    std::vector<std::vector<Vec>> u_se;      // componentwise standard errors
    std::vector<std::vector<Mat>> grad;      // [tau][node] -> d x d
    std::vector<std::vector<Mat>> grad_se;
    bool grad_ready = false;
    double contraction = -1.0;               // max operator norm of grad
    double contraction_se = 0.0;
    bool se_warning = false;                 // gradient noise above 0.1 * contraction

    int d() const { return grid.dim(); }

    int time_index(double tau) const {
        for (size_t i = 0; i < taus.size(); ++i)
            if (std::abs(taus[i] - tau) < 1e-9) return static_cast<int>(i);
        throw std::invalid_argument("TransformField: tau not on the stored ladder");
    }

    Vec eval_u(int ti, const Vec& y) const {
        return grid.interp([&](std::size_t f) { return u[ti][f]; }, y);
    }
    Mat eval_grad(int ti, const Vec& y) const {
        if (!grad_ready) throw std::logic_error("TransformField: gradient not populated");
        return grid.interp([&](std::size_t f) { return grad[ti][f]; }, y);
    }
};

struct SolveConfig {
    double h = 1.0 / 64;  // Euler step; every tau must be a multiple
    McConfig mc;
};

using DriftFn = std::function<Vec(double, const PhaseVector&)>;

namespace detail {

struct NodeAccum {
    std::vector<stats::Accum> a;  // flattened per-component accumulators
    void init(std::size_t k) { a.assign(k, {}); }
    void merge(const NodeAccum& o) {
        if (a.empty()) a.resize(o.a.size());
        for (std::size_t i = 0; i < o.a.size(); ++i) a[i].merge(o.a[i]);
    }
};

}  // namespace detail

// Monte-Carlo evaluation of the probabilistic representation
//   u_tau(x) = int_0^tau exp(-lambda v) E f(X_v(x)) dv
// for every grid node, every tau on the ladder and every lambda at once: one
// simulated path per (sample, node) serves the whole time ladder and all
// lambdas, and with crn_fd the +/- shifted paths share the same driver.
inline std::vector<TransformField> solve_u_multi(const SdeModel& model,
                                                 const std::vector<double>& lambdas, double T,
                                                 const GridSpec& grid,
                                                 const std::vector<double>& taus,
                                                 const SolveConfig& cfg,
                                                 GradMethod method = GradMethod::none,
                                                 DriftFn f_override = {}) {
    const int d = model.d1 + model.d2;
    if (grid.dim() != d) throw std::invalid_argument("solve_u: grid dimension mismatch");
    if (taus.empty()) throw std::invalid_argument("solve_u: empty time ladder");
    const int n_steps = static_cast<int>(std::llround(T / cfg.h));
    if (std::abs(n_steps * cfg.h - T) > 1e-9) throw std::invalid_argument("solve_u: h must divide T");
    std::vector<int> tau_steps;
    for (double tau : taus) {
        const int k = static_cast<int>(std::llround(tau / cfg.h));
        if (std::abs(k * cfg.h - tau) > 1e-9 || k < 0 || k > n_steps)
            throw std::invalid_argument("solve_u: tau must be a grid multiple within [0,T]");
        if (!tau_steps.empty() && k <= tau_steps.back())
            throw std::invalid_argument("solve_u: tau ladder must ascend");
        tau_steps.push_back(k);
    }
    DriftFn f = f_override;
    if (!f)
        f = [&model](double t, const PhaseVector& x) -> Vec {
            Vec v(model.d1 + model.d2);
            v.head(model.d1) = model.b1(t, x);
            v.tail(model.d2) = model.b2(t, x);
            return v;
        };
    if (method == GradMethod::jacobian_flow && !model.drift_jac)
        throw std::invalid_argument("solve_u: jacobian_flow needs drift_jac");

    const std::size_t n_nodes = grid.total();
    const std::size_t n_lam = lambdas.size();
    const std::size_t n_tau = taus.size();
    const int n_grad_cols = method == GradMethod::none ? 0 : d;
    // accumulator layout per (lambda, tau, node): d value slots + d*d gradient slots
    const std::size_t slot = static_cast<std::size_t>(d) * (1 + n_grad_cols);
    const std::size_t table = n_lam * n_tau * n_nodes * slot;

    const uint64_t sd = linear_flow::derive_seed(cfg.mc.seed, cfg.mc.stream_salt);
    const double eps_m = 0.5;  // FD step in units of grid spacing

    auto blocks = par::run_blocks<detail::NodeAccum>(
        cfg.mc.n, cfg.mc.threads,
        [&](std::size_t, std::size_t lo_i, std::size_t hi_i) {
            detail::NodeAccum acc;
            acc.init(table);
            // one path variant: center plus optional +/- shifts per coordinate
            const int n_var = method == GradMethod::crn_fd ? 1 + 2 * d : 1;
            std::vector<Vec> state(n_var);
            std::vector<std::vector<Vec>> integral(n_var);  // [variant][lambda]
            Mat jac;
            std::vector<Mat> jac_integral;
            for (std::size_t i = lo_i; i < hi_i; ++i) {
                BrownianDriver driver(sd, i, T, cfg.h, model.d2);
                for (std::size_t nd = 0; nd < n_nodes; ++nd) {
                    const Vec x0 = grid.node(nd);
                    for (int v = 0; v < n_var; ++v) {
                        state[v] = x0;
                        if (v > 0) {
                            const int m = (v - 1) / 2;
                            state[v](m) += ((v - 1) % 2 == 0 ? 1.0 : -1.0) * eps_m * grid.spacing(m);
                        }
                        integral[v].assign(n_lam, Vec::Zero(d));
                    }
                    if (method == GradMethod::jacobian_flow) {
                        jac = Mat::Identity(d, d);
                        jac_integral.assign(n_lam, Mat::Zero(d, d));
                    }
                    std::vector<Vec> f_prev(n_var);
                    Mat fj_prev;
                    for (int v = 0; v < n_var; ++v)
                        f_prev[v] = f(0.0, PhaseVector::from_joined(model.d1, state[v]));
                    if (method == GradMethod::jacobian_flow)
                        fj_prev = model.drift_jac(0.0, PhaseVector::from_joined(model.d1, state[0]));
                    std::size_t next_tau = 0;
                    while (next_tau < n_tau && tau_steps[next_tau] == 0) ++next_tau;
                    for (int k = 0; k < n_steps; ++k) {
                        const double t = k * cfg.h;
                        const Vec dw = driver.increment(k, 1);
                        for (int v = 0; v < n_var; ++v) {
                            const PhaseVector x = PhaseVector::from_joined(model.d1, state[v]);
                            Vec drift(d);
                            drift.head(model.d1) = model.b1(t, x);
                            drift.tail(model.d2) = model.b2(t, x);
                            if (model.a) drift += model.a(t, x);
                            if (method == GradMethod::jacobian_flow && v == 0)
                                jac += cfg.h * (model.drift_jac(t, x) * jac);
                            state[v] += cfg.h * drift;
                            state[v].tail(model.d2) += model.sigma(t, x) * dw;
                        }
                        const double t1 = (k + 1) * cfg.h;
                        for (int v = 0; v < n_var; ++v) {
                            const Vec f_now = f(t1, PhaseVector::from_joined(model.d1, state[v]));
                            for (std::size_t l = 0; l < n_lam; ++l) {
                                const double w0 = std::exp(-lambdas[l] * t);
                                const double w1 = std::exp(-lambdas[l] * t1);
                                integral[v][l] += 0.5 * cfg.h * (w0 * f_prev[v] + w1 * f_now);
                            }
                            f_prev[v] = f_now;
                        }
                        if (method == GradMethod::jacobian_flow) {
                            const Mat fj_now =
                                model.drift_jac(t1, PhaseVector::from_joined(model.d1, state[0])) * jac;
                            for (std::size_t l = 0; l < n_lam; ++l) {
                                const double w0 = std::exp(-lambdas[l] * t);
                                const double w1 = std::exp(-lambdas[l] * t1);
                                jac_integral[l] += 0.5 * cfg.h * (w0 * fj_prev + w1 * fj_now);
                            }
                            fj_prev = fj_now;
                        }
                        if (next_tau < n_tau && tau_steps[next_tau] == k + 1) {
                            for (std::size_t l = 0; l < n_lam; ++l) {
                                const std::size_t base = ((l * n_tau + next_tau) * n_nodes + nd) * slot;
                                for (int c = 0; c < d; ++c) acc.a[base + c].add(integral[0][l](c));
                                if (method == GradMethod::crn_fd) {
                                    for (int m = 0; m < d; ++m) {
                                        const double den = 2.0 * eps_m * grid.spacing(m);
                                        const Vec col =
                                            (integral[1 + 2 * m][l] - integral[2 + 2 * m][l]) / den;
                                        for (int c = 0; c < d; ++c)
                                            acc.a[base + d * (1 + m) + c].add(col(c));
                                    }
                                } else if (method == GradMethod::jacobian_flow) {
                                    for (int m = 0; m < d; ++m)
                                        for (int c = 0; c < d; ++c)
                                            acc.a[base + d * (1 + m) + c].add(jac_integral[l](c, m));
                                }
                            }
                            ++next_tau;
                        }
                    }
                }
            }
            return acc;
        },
        256);

    detail::NodeAccum total;
    total.init(table);
    for (const auto& b : blocks) total.merge(b);

    std::vector<TransformField> fields;
    for (std::size_t l = 0; l < n_lam; ++l) {
        TransformField fld;
        fld.T = T;
        fld.lambda = lambdas[l];
        fld.grid = grid;
        fld.taus = taus;
        fld.u.assign(n_tau, std::vector<Vec>(n_nodes));
        fld.u_se.assign(n_tau, std::vector<Vec>(n_nodes));
        if (method != GradMethod::none) {
            fld.grad.assign(n_tau, std::vector<Mat>(n_nodes));
            fld.grad_se.assign(n_tau, std::vector<Mat>(n_nodes));
        }
        double contraction = 0.0, c_se = 0.0;
        for (std::size_t ti = 0; ti < n_tau; ++ti) {
            for (std::size_t nd = 0; nd < n_nodes; ++nd) {
                const std::size_t base = ((l * n_tau + ti) * n_nodes + nd) * slot;
                Vec val(d), se(d);
                for (int c = 0; c < d; ++c) {
                    val(c) = total.a[base + c].mean();
                    se(c) = total.a[base + c].stderr_mean();
                }
                fld.u[ti][nd] = val;
                fld.u_se[ti][nd] = se;
                if (method != GradMethod::none) {
                    Mat g(d, d), gse(d, d);
                    for (int m = 0; m < d; ++m)
                        for (int c = 0; c < d; ++c) {
                            g(c, m) = total.a[base + d * (1 + m) + c].mean();
                            gse(c, m) = total.a[base + d * (1 + m) + c].stderr_mean();
                        }
                    fld.grad[ti][nd] = g;
                    fld.grad_se[ti][nd] = gse;
                    const double nrm = operator_norm(g);
                    if (nrm > contraction) {
                        contraction = nrm;
                        c_se = gse.norm();
                    }
                }
            }
        }
        if (method != GradMethod::none) {
            fld.grad_ready = true;
            fld.contraction = contraction;
            fld.contraction_se = c_se;
            fld.se_warning = c_se > 0.1 * std::max(contraction, 1e-12);
        }
        fields.push_back(std::move(fld));
    }
    return fields;
}

inline TransformField solve_u(const SdeModel& model, double lambda, double T, const GridSpec& grid,
                              const std::vector<double>& taus, const SolveConfig& cfg,
                              GradMethod method = GradMethod::crn_fd, DriftFn f_override = {}) {
    return solve_u_multi(model, {lambda}, T, grid, taus, cfg, method, std::move(f_override))[0];
}

// Populate the gradient table of an existing field (re-simulates with the
// same stream keys, so the values stay consistent with the original solve).
inline TransformField grad_u(const SdeModel& model, const TransformField& field,
                             const SolveConfig& cfg, GradMethod method = GradMethod::crn_fd,
                             DriftFn f_override = {}) {
    if (method == GradMethod::none) throw std::invalid_argument("grad_u: pick a gradient method");
    return solve_u(model, field.lambda, field.T, field.grid, field.taus, cfg, method,
                   std::move(f_override));
}

// --- lambda sweep -----------------------------------------------------------

struct SweepResult {
    std::vector<double> lambdas;
    std::vector<double> contraction;
    std::vector<double> se;
    double threshold_lambda = -1.0;  // smallest swept lambda with contraction < 1/2
    bool monotone_within_2se = true;
};

inline SweepResult lambda_sweep(const SdeModel& model, const std::vector<double>& lambdas, double T,
                                const GridSpec& grid, const std::vector<double>& taus,
                                const SolveConfig& cfg, DriftFn f_override = {}) {
    if (lambdas.size() < 4 || !(lambdas.back() / lambdas.front() >= 32.0))
        throw std::invalid_argument("lambda_sweep: need >= 4 lambdas spanning a wide range (>= 32x)");
    auto fields = solve_u_multi(model, lambdas, T, grid, taus, cfg, GradMethod::crn_fd,
                                std::move(f_override));
    SweepResult r;
    r.lambdas = lambdas;
    for (const auto& f : fields) {
        r.contraction.push_back(f.contraction);
        r.se.push_back(f.contraction_se);
    }
    for (size_t i = 1; i < r.contraction.size(); ++i)
        if (r.contraction[i] > r.contraction[i - 1] + 2.0 * (r.se[i] + r.se[i - 1]))
            r.monotone_within_2se = false;
    for (size_t i = 0; i < r.contraction.size(); ++i)
        if (r.contraction[i] < 0.5) {
            r.threshold_lambda = r.lambdas[i];
            break;
        }
    return r;
}

// Analytic decay envelope int_0^T exp(-lambda u) phi(sqrt u)/u du. The lower
// truncation sits very deep: for phi = pow(alpha) the omitted tail scales like
// eps^{alpha/2}, which decays slowly in the cutoff.
inline double envelope_integral(const modulus::ModulusFn& phi, double lambda, double T) {
    return quad::gauss16_log(
        [&](double u) { return std::exp(-lambda * u) * phi(std::sqrt(u)) / u; },
        T * std::ldexp(1.0, -240), T, 2);
}

inline LineFit envelope_slope(const modulus::ModulusFn& phi, const std::vector<double>& lambdas,
                              double T) {
    std::vector<double> lx, ly;
    for (double lam : lambdas) {
        lx.push_back(std::log(lam));
        ly.push_back(std::log(envelope_integral(phi, lam, T)));
    }
    return fit_line(lx, ly);
}

// --- transform --------------------------------------------------------------

// Phi_t(x) = x + u_{T-t}(x); invertible by damped fixed point once the
// gradient table certifies contraction < 1/2.
class Transform {
  public:
    explicit Transform(std::shared_ptr<const TransformField> field) : field_(std::move(field)) {
        if (!field_->grad_ready)
            throw std::invalid_argument("Transform: gradient table required before inversion");
        if (!(field_->contraction < 0.5))
            throw std::invalid_argument("Transform: contraction must be < 1/2");
    }

    const TransformField& field() const { return *field_; }
    int time_index(double tau) const { return field_->time_index(tau); }

    Vec forward(int ti, const Vec& x) const { return x + field_->eval_u(ti, x); }

    Vec inverse(int ti, const Vec& z) const {
        Vec y = z;
        for (int it = 0; it < 300; ++it) {
            const Vec next = z - field_->eval_u(ti, y);
            const double step = (next - y).norm();
            y = next;
            if (step < 1e-10) return y;
        }
        throw std::runtime_error("Transform: fixed-point inversion did not converge");
    }

    // d x d2 block of grad Phi acting on noise directions
    Mat grad2_phi(int ti, const Vec& x, int d1, int d2) const {
        const Mat g = field_->eval_grad(ti, x);
        Mat out = Mat::Zero(d1 + d2, d2);
        out.bottomRows(d2) = Mat::Identity(d2, d2);
        out += g.rightCols(d2);
        return out;
    }

  private:
    std::shared_ptr<const TransformField> field_;
};

inline Transform build_transform(std::shared_ptr<const TransformField> field) {
    return Transform(std::move(field));
}

// Coefficients of the transformed equation: drift g and diffusion Theta.
struct TransformedCoeffs {
    std::function<Vec(int, const Vec&)> g;      // (time index, y)
    std::function<Mat(int, const Vec&)> theta;  // (time index, y)
};

inline TransformedCoeffs transformed_coeffs(const SdeModel& model, const Transform& tr) {
    const int d1 = model.d1, d2 = model.d2;
    auto g = [&model, &tr, d1, d2](int ti, const Vec& y) -> Vec {
        const Vec x = tr.inverse(ti, y);
        Vec out = tr.field().lambda * tr.field().eval_u(ti, x);
        if (model.a) {
            const double t = tr.field().T - tr.field().taus[ti];
            const Vec av = model.a(t, PhaseVector::from_joined(d1, x));
            const Mat grad_phi =
                Mat::Identity(d1 + d2, d1 + d2) + tr.field().eval_grad(ti, x);
            out += grad_phi * av;
        }
        return out;
    };
    auto theta = [&model, &tr, d1, d2](int ti, const Vec& y) -> Mat {
        const Vec x = tr.inverse(ti, y);
        const double t = tr.field().T - tr.field().taus[ti];
        return tr.grad2_phi(ti, x, d1, d2) * model.sigma(t, PhaseVector::from_joined(d1, x));
    };
    return {g, theta};
}

// --- regularity probe ---------------------------------------------------------

struct LipschitzProfile {
    std::vector<double> r;
    std::vector<double> L;  // max difference quotient at separation r
    LineFit fit;            // slope of log L vs log r
};

// L(r) = max over (center, direction) pairs of |fn(c + r dir) - fn(c)| / r.
// Hoelder-alpha behavior shows as slope alpha - 1; Lipschitz data stays flat.
template <class Fn>
LipschitzProfile lipschitz_probe(Fn fn, const std::vector<Vec>& centers,
                                 const std::vector<Vec>& dirs, const std::vector<double>& scales) {
    LipschitzProfile prof;
    for (double r : scales) {
        double best = 0.0;
        for (const auto& c : centers)
            for (const auto& dir : dirs) {
                const Vec a = c + r * dir;
                const double diff = (fn(a) - fn(c)).norm() / (r * dir.norm());
                best = std::max(best, diff);
            }
        prof.r.push_back(r);
        prof.L.push_back(best);
    }
    std::vector<double> lx, ly;
    for (size_t i = 0; i < prof.r.size(); ++i) {
        lx.push_back(std::log(prof.r[i]));
        ly.push_back(std::log(std::max(prof.L[i], 1e-300)));
    }
    prof.fit = fit_line(lx, ly);
    return prof;
}

// --- serialization ------------------------------------------------------------

inline void write_field(const TransformField& f, const std::string& path) {
    ensure_parent_dir(path);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_field: cannot open " + path);
    const int d = f.d();
    out << "zvonkin_field " << format_double(f.T) << ' ' << format_double(f.lambda) << ' ' << d
        << ' ' << f.taus.size() << ' ' << (f.grad_ready ? 1 : 0) << '\n';
    for (int m = 0; m < d; ++m)
        out << format_double(f.grid.lo(m)) << ' ' << format_double(f.grid.hi(m)) << ' '
            << f.grid.npts[m] << '\n';
    for (double tau : f.taus) out << format_double(tau) << ' ';
    out << '\n';
    for (size_t ti = 0; ti < f.taus.size(); ++ti)
        for (size_t nd = 0; nd < f.grid.total(); ++nd) {
            for (int c = 0; c < d; ++c) out << format_double(f.u[ti][nd](c)) << ' ';
            if (f.grad_ready)
                for (int m = 0; m < d; ++m)
                    for (int c = 0; c < d; ++c) out << format_double(f.grad[ti][nd](c, m)) << ' ';
            out << '\n';
        }
}

inline TransformField read_field(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_field: cannot open " + path);
    std::string tag;
    int d = 0, n_tau = 0, has_grad = 0;
    TransformField f;
    if (!(in >> tag >> f.T >> f.lambda >> d >> n_tau >> has_grad) || tag != "zvonkin_field")
        throw std::runtime_error("read_field: bad header");
    f.grid.lo.resize(d);
    f.grid.hi.resize(d);
    f.grid.npts.resize(d);
    for (int m = 0; m < d; ++m) in >> f.grid.lo(m) >> f.grid.hi(m) >> f.grid.npts[m];
    f.taus.resize(n_tau);
    for (auto& t : f.taus) in >> t;
    const std::size_t nodes = f.grid.total();
    f.u.assign(n_tau, std::vector<Vec>(nodes, Vec::Zero(d)));
    f.u_se.assign(n_tau, std::vector<Vec>(nodes, Vec::Zero(d)));
    if (has_grad) f.grad.assign(n_tau, std::vector<Mat>(nodes, Mat::Zero(d, d)));
    for (int ti = 0; ti < n_tau; ++ti)
        for (std::size_t nd = 0; nd < nodes; ++nd) {
            for (int c = 0; c < d; ++c) in >> f.u[ti][nd](c);
            if (has_grad)
                for (int m = 0; m < d; ++m)
                    for (int c = 0; c < d; ++c) in >> f.grad[ti][nd](c, m);
        }
    if (!in) throw std::runtime_error("read_field: truncated table");
    f.grad_ready = has_grad != 0;
    if (f.grad_ready) {
        double c = 0.0;
        for (int ti = 0; ti < n_tau; ++ti)
            for (std::size_t nd = 0; nd < nodes; ++nd) c = std::max(c, operator_norm(f.grad[ti][nd]));
        f.contraction = c;
    }
    return f;
}

}  // namespace hamlab::zvonkin
