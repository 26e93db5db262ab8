#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "hamlab/common.hpp"
#include "hamlab/rng.hpp"
#include "hamlab/stats.hpp"

namespace hamlab::linear_flow {

struct PhaseVector {
    Vec x1, x2;

    PhaseVector() = default;
    PhaseVector(Vec a, Vec b) : x1(std::move(a)), x2(std::move(b)) {}
    static PhaseVector zero(int d1, int d2) { return {Vec::Zero(d1), Vec::Zero(d2)}; }
    static PhaseVector from_joined(int d1, const Vec& z) {
        return {z.head(d1), z.tail(z.size() - d1)};
    }
    Vec joined() const {
        Vec z(x1.size() + x2.size());
        z << x1, x2;
        return z;
    }
    double norm() const { return joined().norm(); }
};

// Piecewise-constant coefficient path for the frozen linear system:
// position block is driven through B, noise enters the velocity block via
// sigma. Every sigma piece and every B B^T must be invertible.
struct TimeMatrixPath {
    std::vector<double> breaks;   // t0 < ... < tm
    std::vector<Mat> B;           // d1 x d2, one per piece
    std::vector<Mat> sigma;       // d2 x d2, one per piece
    int d1 = 0, d2 = 0;
    double kappa = 0.0;

    TimeMatrixPath(std::vector<double> bk, std::vector<Mat> b, std::vector<Mat> sg)
        : breaks(std::move(bk)), B(std::move(b)), sigma(std::move(sg)) {
        if (breaks.size() < 2 || B.size() != breaks.size() - 1 || sigma.size() != B.size())
            throw std::invalid_argument("TimeMatrixPath: inconsistent piece counts");
        for (size_t i = 1; i < breaks.size(); ++i)
            if (!(breaks[i] > breaks[i - 1]))
                throw std::invalid_argument("TimeMatrixPath: breakpoints must increase");
        d1 = static_cast<int>(B[0].rows());
        d2 = static_cast<int>(B[0].cols());
        for (size_t i = 0; i < B.size(); ++i) {
            if (B[i].rows() != d1 || B[i].cols() != d2 || sigma[i].rows() != d2 || sigma[i].cols() != d2)
                throw std::invalid_argument("TimeMatrixPath: piece dimension mismatch");
            Eigen::JacobiSVD<Mat> svd_s(sigma[i]);
            const double smin_s = svd_s.singularValues().minCoeff();
            if (!(smin_s > 1e-12)) throw std::invalid_argument("TimeMatrixPath: singular sigma piece");
            Eigen::JacobiSVD<Mat> svd_b(B[i] * B[i].transpose());
            const double smin_b = svd_b.singularValues().minCoeff();
            if (!(smin_b > 1e-12)) throw std::invalid_argument("TimeMatrixPath: degenerate B B^T piece");
            kappa = std::max(kappa, operator_norm(B[i]) + operator_norm(sigma[i]) + 1.0 / smin_b +
                                        1.0 / smin_s);
        }
    }

    static TimeMatrixPath constant(const Mat& b, const Mat& s, double t0, double t1) {
        return TimeMatrixPath({t0, t1}, {b}, {s});
    }

    double t_begin() const { return breaks.front(); }
    double t_end() const { return breaks.back(); }

    int piece_at(double r) const {
        if (r < t_begin() - 1e-14 || r > t_end() + 1e-14)
            throw std::out_of_range("TimeMatrixPath: time outside span");
        const auto it = std::upper_bound(breaks.begin(), breaks.end(), r);
        const int i = static_cast<int>(it - breaks.begin()) - 1;
        return std::clamp(i, 0, static_cast<int>(B.size()) - 1);
    }

    void check_span(double s, double t) const {
        if (s < t_begin() - 1e-14 || t > t_end() + 1e-14 || s > t)
            throw std::out_of_range("TimeMatrixPath: [s,t] outside span");
    }
};

namespace detail {

// Visit maximal subintervals of [s,t] on which the path is constant,
// optionally refined by extra cut points.
template <class Fn>
void for_each_piece(const TimeMatrixPath& path, double s, double t, const std::vector<double>& cuts,
                    Fn fn) {
    std::vector<double> pts{s, t};
    for (double b : path.breaks)
        if (b > s && b < t) pts.push_back(b);
    for (double c : cuts)
        if (c > s && c < t) pts.push_back(c);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-15; }),
              pts.end());
    for (size_t k = 0; k + 1 < pts.size(); ++k) {
        const double p = pts[k], q = pts[k + 1];
        fn(p, q, path.piece_at(0.5 * (p + q)));
    }
}

}  // namespace detail

inline Mat gamma(const TimeMatrixPath& path, double s, double t) {
    path.check_span(s, t);
    Mat g = Mat::Zero(path.d1, path.d2);
    detail::for_each_piece(path, s, t, {}, [&](double p, double q, int i) { g += (q - p) * path.B[i]; });
    return g;
}

namespace detail {
// int_p^q (t-r)(r-s) dr
inline double quadratic_weight(double s, double t, double p, double q) {
    const double c2 = -(q * q * q - p * p * p) / 3.0;
    const double c1 = (s + t) * (q * q - p * p) / 2.0;
    const double c0 = -s * t * (q - p);
    return c2 + c1 + c0;
}
}  // namespace detail

inline Mat q_matrix(const TimeMatrixPath& path, double s, double t) {
    path.check_span(s, t);
    if (!(t > s)) throw std::invalid_argument("q_matrix: need s < t");
    Mat q = Mat::Zero(path.d1, path.d1);
    detail::for_each_piece(path, s, t, {}, [&](double p, double r, int i) {
        q += detail::quadratic_weight(s, t, p, r) * (path.B[i] * path.B[i].transpose());
    });
    return 0.5 * (q + q.transpose());
}

// int_s^t (t-r)(r-s) B_r dr; its Moore-Penrose right inverse drives the
// Girsanov shift. For a constant piece this reduces to B^T Q^{-1}.
inline Mat m_matrix(const TimeMatrixPath& path, double s, double t) {
    path.check_span(s, t);
    Mat m = Mat::Zero(path.d1, path.d2);
    detail::for_each_piece(path, s, t, {}, [&](double p, double q, int i) {
        m += detail::quadratic_weight(s, t, p, q) * path.B[i];
    });
    return m;
}

// Deterministic Cameron-Martin direction, affine in r: Phi(r) = c0 + c1 r.
struct AffineShift {
    Vec c0, c1;
    double s = 0.0, t = 0.0;
    Vec eval(double r) const { return c0 + r * c1; }
};

inline AffineShift phi_shift(const TimeMatrixPath& path, double s, double t, const PhaseVector& h) {
    path.check_span(s, t);
    if (!(t > s)) throw std::invalid_argument("phi_shift: need s < t");
    const double delta = t - s;
    // v = h1 + int (t-r)/(t-s) B_r h2 dr
    Vec v = h.x1;
    detail::for_each_piece(path, s, t, {}, [&](double p, double q, int i) {
        const double w = (t * (q - p) - 0.5 * (q * q - p * p)) / delta;
        v += w * (path.B[i] * h.x2);
    });
    const Mat m = m_matrix(path, s, t);
    const Mat mm = m * m.transpose();
    Eigen::LLT<Mat> llt(mm);
    if (llt.info() != Eigen::Success) throw std::runtime_error("phi_shift: singular weight matrix");
    const Vec w = m.transpose() * llt.solve(v);
    AffineShift phi;
    phi.s = s;
    phi.t = t;
    phi.c0 = h.x2 / delta + (s + t) * w;
    phi.c1 = -2.0 * w;
    return phi;
}

// Residuals of the two exact null-shift identities, via closed-form
// piecewise-polynomial integration.
inline std::pair<double, double> null_shift_check(const TimeMatrixPath& path, double s, double t,
                                                  const PhaseVector& h) {
    const AffineShift phi = phi_shift(path, s, t, h);
    const Vec int_phi = (t - s) * phi.c0 + 0.5 * (t * t - s * s) * phi.c1;
    const double res1 = (h.x2 - int_phi).norm();
    // int_s^t B_r [h2 - int_s^r Phi] dr, with int_s^r Phi = c0 (r-s) + c1 (r^2-s^2)/2
    Vec acc = h.x1;
    detail::for_each_piece(path, s, t, {}, [&](double p, double q, int i) {
        const double L = q - p;
        const double i_r = 0.5 * (q * q - p * p);
        const double i_r2 = (q * q * q - p * p * p) / 3.0;
        Vec inner = h.x2 * L - phi.c0 * (i_r - s * L) - 0.5 * phi.c1 * (i_r2 - s * s * L);
        acc += path.B[i] * inner;
    });
    return {res1, acc.norm()};
}

// A Bismut weight: Wiener integral of sigma^{-1} Phi^{breve h} over [a,b].
struct WeightSpec {
    double a = 0.0, b = 0.0;
    PhaseVector h;
};

struct GaussianLaw {
    Vec mean;
    Mat cov;
    int d1 = 0, d2 = 0, n_w = 0;

    const Mat& chol() const {
        if (!chol_ready_) {
            if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + cov.cwiseAbs().maxCoeff()))
                throw std::runtime_error("GaussianLaw: covariance not symmetric");
            if (!try_factor(cov)) {
                // one round of PSD jitter, then give up
                const Mat jittered =
                    cov + 1e-12 * std::max(cov.trace(), 1.0) * Mat::Identity(cov.rows(), cov.cols());
                if (!try_factor(jittered))
                    throw std::runtime_error("GaussianLaw: covariance factorization failed beyond jitter");
                jittered_ = true;
            }
            chol_ready_ = true;
        }
        return chol_;
    }
    bool jittered() const { return jittered_; }

  private:
    // Pivoted LDL^T with small negative pivots clamped to zero, so exactly
    // semidefinite covariances (including zero) factor without jitter.
    bool try_factor(const Mat& c) const {
        Eigen::LDLT<Mat> ldlt(c);
        if (ldlt.info() != Eigen::Success) return false;
        Vec d = ldlt.vectorD();
        const double floor = -1e-10 * std::max(c.trace(), 1e-30);
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            if (d(i) < floor) return false;
            d(i) = d(i) > 0 ? std::sqrt(d(i)) : 0.0;
        }
        Mat l = Mat(ldlt.matrixL()) * d.asDiagonal();
        chol_ = ldlt.transpositionsP().transpose() * l;
        const double err = (chol_ * chol_.transpose() - c).cwiseAbs().maxCoeff();
        return err <= 1e-8 * (1.0 + c.cwiseAbs().maxCoeff());
    }

    mutable Mat chol_;
    mutable bool chol_ready_ = false;
    mutable bool jittered_ = false;
};

// Exact joint law of (X1, X2, xi_1..xi_n) for the frozen linear system.
// All covariance entries are per-piece polynomial integrals; no quadrature.
inline GaussianLaw joint_law_specs(const TimeMatrixPath& path, double s, double t,
                                   const PhaseVector& x, const std::vector<WeightSpec>& specs) {
    path.check_span(s, t);
    const int d1 = path.d1, d2 = path.d2;
    const int n = static_cast<int>(specs.size());
    const int dim = d1 + d2 + n;

    // Each weight's Camaron-Martin direction lives on its own support, with
    // the direction transported by Gamma_{s,a}: this is the construction the
    // derivative formula's induction actually uses, and the one that
    // reproduces mixed second derivatives.
    std::vector<AffineShift> phis;
    phis.reserve(n);
    std::vector<double> cuts;
    for (const auto& w : specs) {
        if (w.a < s - 1e-14 || w.b > t + 1e-14 || !(w.b > w.a))
            throw std::invalid_argument("joint_law: weight support outside [s,t]");
        PhaseVector breve{w.h.x1 + gamma(path, s, w.a) * w.h.x2, w.h.x2};
        phis.push_back(phi_shift(path, w.a, w.b, breve));
        cuts.push_back(w.a);
        cuts.push_back(w.b);
    }

    GaussianLaw law;
    law.d1 = d1;
    law.d2 = d2;
    law.n_w = n;
    law.mean = Vec::Zero(dim);
    law.mean.head(d1) = x.x1 + gamma(path, s, t) * x.x2;
    law.mean.segment(d1, d2) = x.x2;
    law.cov = Mat::Zero(dim, dim);

    // collect refined intervals with right-anchored Gamma_{q,t}
    struct Interval {
        double p, q;
        int piece;
        Mat gq;  // Gamma_{q,t}
    };
    std::vector<Interval> ivs;
    detail::for_each_piece(path, s, t, cuts,
                           [&](double p, double q, int i) { ivs.push_back({p, q, i, Mat()}); });
    Mat g = Mat::Zero(d1, d2);
    for (auto it = ivs.rbegin(); it != ivs.rend(); ++it) {
        it->gq = g;
        g += (it->q - it->p) * path.B[it->piece];
    }

    auto cov11 = [&](Eigen::Ref<Mat> out, const Interval& iv, const Mat& S) {
        const double L = iv.q - iv.p;
        const Mat& Bm = path.B[iv.piece];
        out += iv.gq * S * iv.gq.transpose() * L +
               (Bm * S * iv.gq.transpose() + iv.gq * S * Bm.transpose()) * (L * L / 2.0) +
               Bm * S * Bm.transpose() * (L * L * L / 3.0);
    };

    for (const auto& iv : ivs) {
        const Mat S = path.sigma[iv.piece] * path.sigma[iv.piece].transpose();
        const double L = iv.q - iv.p;
        cov11(law.cov.topLeftCorner(d1, d1), iv, S);
        law.cov.block(0, d1, d1, d2) += (iv.gq + path.B[iv.piece] * (L / 2.0)) * S * L;
        law.cov.block(d1, d1, d2, d2) += S * L;

        const double i_r = 0.5 * (iv.q * iv.q - iv.p * iv.p);
        const double i_r2 = (iv.q * iv.q * iv.q - iv.p * iv.p * iv.p) / 3.0;
        const Mat sig_inv = path.sigma[iv.piece].inverse();
        for (int i = 0; i < n; ++i) {
            if (iv.p < specs[i].a - 1e-14 || iv.q > specs[i].b + 1e-14) continue;
            const Vec& c0 = phis[i].c0;
            const Vec& c1 = phis[i].c1;
            // cov(X1, xi_i) over this interval: int Gamma_{r,t} Phi_i(r) dr
            const Mat gq_bq = iv.gq + path.B[iv.piece] * iv.q;
            law.cov.block(0, d1 + d2 + i, d1, 1) +=
                gq_bq * (c0 * L + c1 * i_r) - path.B[iv.piece] * (c0 * i_r + c1 * i_r2);
            // cov(X2, xi_i): int Phi_i(r) dr
            law.cov.block(d1, d1 + d2 + i, d2, 1) += c0 * L + c1 * i_r;
            const Vec ui = sig_inv * c0, vi = sig_inv * c1;
            for (int j = i; j < n; ++j) {
                if (iv.p < specs[j].a - 1e-14 || iv.q > specs[j].b + 1e-14) continue;
                const Vec uj = sig_inv * phis[j].c0, vj = sig_inv * phis[j].c1;
                law.cov(d1 + d2 + i, d1 + d2 + j) +=
                    ui.dot(uj) * L + (ui.dot(vj) + vi.dot(uj)) * i_r + vi.dot(vj) * i_r2;
            }
        }
    }
    law.cov = Mat(law.cov.selfadjointView<Eigen::Upper>());
    return law;
}

// Partition form: direction i is carried by subinterval [s_{i-1}, s_i].
inline GaussianLaw joint_law(const TimeMatrixPath& path, double s, double t, const PhaseVector& x,
                             const std::vector<double>& partition,
                             const std::vector<PhaseVector>& directions) {
    if (directions.empty()) return joint_law_specs(path, s, t, x, {});
    if (partition.size() != directions.size() + 1 || std::abs(partition.front() - s) > 1e-14 ||
        std::abs(partition.back() - t) > 1e-14)
        throw std::invalid_argument("joint_law: partition must run from s to t with one cell per direction");
    std::vector<WeightSpec> specs;
    for (size_t i = 0; i < directions.size(); ++i)
        specs.push_back({partition[i], partition[i + 1], directions[i]});
    return joint_law_specs(path, s, t, x, specs);
}

inline GaussianLaw state_law(const TimeMatrixPath& path, double s, double t, const PhaseVector& x) {
    return joint_law_specs(path, s, t, x, {});
}

// State transition of the linear flow: X_{s,t}(x) mean = A x.
inline Mat state_transition(const TimeMatrixPath& path, double s, double t) {
    const int d1 = path.d1, d2 = path.d2;
    Mat a = Mat::Identity(d1 + d2, d1 + d2);
    a.block(0, d1, d1, d2) = gamma(path, s, t);
    return a;
}

struct McConfig {
    uint64_t seed = 0;
    std::size_t n = 100000;
    unsigned threads = 0;
    uint64_t stream_salt = 0;  // distinct estimators get distinct streams
};

inline uint64_t derive_seed(uint64_t seed, uint64_t salt) {
    uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Deterministic i.i.d. draws; draw i depends only on (seed, salt, i).
template <class Fn>
void sample_visit(const GaussianLaw& law, const McConfig& mc, std::size_t n, Fn fn) {
    const Mat& L = law.chol();
    const uint64_t sd = derive_seed(mc.seed, mc.stream_salt);
    const auto dim = law.mean.size();
    auto blocks = par::run_blocks<int>(n, mc.threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
        Vec g(dim), z(dim);
        for (std::size_t i = lo; i < hi; ++i) {
            rng::NormalStream st(sd, rng::Purpose::law_sample, i);
            for (Eigen::Index k = 0; k < dim; ++k) g(k) = st.next();
            z = law.mean + L * g;
            fn(i, z);
        }
        return 0;
    });
    (void)blocks;
}

inline Mat sample(const GaussianLaw& law, const McConfig& mc, std::size_t n) {
    Mat out(n, law.mean.size());
    sample_visit(law, mc, n, [&](std::size_t i, const Vec& z) { out.row(i) = z.transpose(); });
    return out;
}

using ScalarFn = std::function<double(const PhaseVector&)>;

// P_{s,t} f(x) by Monte Carlo on the exact law.
inline stats::Estimate semigroup(const TimeMatrixPath& path, double s, double t, const PhaseVector& x,
                                 const ScalarFn& f, const McConfig& mc) {
    const GaussianLaw law = state_law(path, s, t, x);
    const Mat& L = law.chol();
    const uint64_t sd = derive_seed(mc.seed, mc.stream_salt);
    const int d1 = path.d1;
    return stats::mc_mean(mc.n, mc.threads, [&](std::size_t i) {
        rng::NormalStream st(sd, rng::Purpose::law_sample, i);
        Vec g(law.mean.size());
        for (Eigen::Index k = 0; k < g.size(); ++k) g(k) = st.next();
        const Vec z = law.mean + L * g;
        return f(PhaseVector::from_joined(d1, z));
    });
}

// nabla_{h_1}...nabla_{h_n} P_{s,t} f(x) = E[f(X) prod xi_i], uniform partition.
inline stats::Estimate bismut_derivative(const TimeMatrixPath& path, double s, double t,
                                         const PhaseVector& x, const ScalarFn& f,
                                         const std::vector<PhaseVector>& directions,
                                         const McConfig& mc) {
    const int n = static_cast<int>(directions.size());
    if (n < 1 || n > 3) throw std::invalid_argument("bismut_derivative: derivative order must be 1..3");
    std::vector<double> part(n + 1);
    for (int i = 0; i <= n; ++i) part[i] = s + (t - s) * i / n;
    const GaussianLaw law = joint_law(path, s, t, x, part, directions);
    const Mat& L = law.chol();
    const uint64_t sd = derive_seed(mc.seed, mc.stream_salt);
    const int d1 = path.d1, d2 = path.d2;
    return stats::mc_mean(mc.n, mc.threads, [&](std::size_t i) {
        rng::NormalStream st(sd, rng::Purpose::law_sample, i);
        Vec g(law.mean.size());
        for (Eigen::Index k = 0; k < g.size(); ++k) g(k) = st.next();
        const Vec z = law.mean + L * g;
        double w = 1.0;
        for (int j = 0; j < n; ++j) w *= z(d1 + d2 + j);
        return f(PhaseVector::from_joined(d1, z.head(d1 + d2))) * w;
    });
}

// Full gradient in one pass: one weight per coordinate direction, each carried
// by the whole interval.
inline std::pair<Vec, Vec> bismut_gradient(const TimeMatrixPath& path, double s, double t,
                                           const PhaseVector& x, const ScalarFn& f,
                                           const McConfig& mc) {
    const int d1 = path.d1, d2 = path.d2, d = d1 + d2;
    std::vector<WeightSpec> specs;
    for (int i = 0; i < d; ++i) {
        Vec e = Vec::Zero(d);
        e(i) = 1.0;
        specs.push_back({s, t, PhaseVector::from_joined(d1, e)});
    }
    const GaussianLaw law = joint_law_specs(path, s, t, x, specs);
    const Mat& L = law.chol();
    const uint64_t sd = derive_seed(mc.seed, mc.stream_salt);
    auto est = stats::mc_mean_multi(mc.n, d, mc.threads, [&](std::size_t i, std::vector<double>& out) {
        rng::NormalStream st(sd, rng::Purpose::law_sample, i);
        Vec g(law.mean.size());
        for (Eigen::Index k = 0; k < g.size(); ++k) g(k) = st.next();
        const Vec z = law.mean + L * g;
        const double fv = f(PhaseVector::from_joined(d1, z.head(d)));
        for (int j = 0; j < d; ++j) out[j] = fv * z(d + j);
    });
    Vec val(d), se(d);
    for (int j = 0; j < d; ++j) {
        val(j) = est[j].value;
        se(j) = est[j].se;
    }
    return {val, se};
}

// Central difference of P_{s,t} f along h with common random numbers: both
// shifted states reuse the same Gaussian draw, only the mean moves.
inline stats::Estimate fd_derivative(const TimeMatrixPath& path, double s, double t,
                                     const PhaseVector& x, const ScalarFn& f, const PhaseVector& h,
                                     double eps, const McConfig& mc) {
    if (eps <= 0.0) eps = std::cbrt(1e-3);
    const GaussianLaw law = state_law(path, s, t, x);
    const Mat& L = law.chol();
    const Vec shift = eps * (state_transition(path, s, t) * h.joined());
    const uint64_t sd = derive_seed(mc.seed, mc.stream_salt);
    const int d1 = path.d1;
    return stats::mc_mean(mc.n, mc.threads, [&](std::size_t i) {
        rng::NormalStream st(sd, rng::Purpose::fd_sample, i);
        Vec g(law.mean.size());
        for (Eigen::Index k = 0; k < g.size(); ++k) g(k) = st.next();
        const Vec z = law.mean + L * g;
        return (f(PhaseVector::from_joined(d1, z + shift)) - f(PhaseVector::from_joined(d1, z - shift))) /
               (2.0 * eps);
    });
}

inline stats::Estimate fd_second(const TimeMatrixPath& path, double s, double t, const PhaseVector& x,
                                 const ScalarFn& f, const PhaseVector& h1, const PhaseVector& h2,
                                 double eps, const McConfig& mc) {
    if (eps <= 0.0) eps = 0.1;
    const GaussianLaw law = state_law(path, s, t, x);
    const Mat& L = law.chol();
    const Mat a = state_transition(path, s, t);
    const Vec s1 = eps * (a * h1.joined());
    const Vec s2 = eps * (a * h2.joined());
    const uint64_t sd = derive_seed(mc.seed, mc.stream_salt);
    const int d1 = path.d1;
    return stats::mc_mean(mc.n, mc.threads, [&](std::size_t i) {
        rng::NormalStream st(sd, rng::Purpose::fd_sample, i);
        Vec g(law.mean.size());
        for (Eigen::Index k = 0; k < g.size(); ++k) g(k) = st.next();
        const Vec z = law.mean + L * g;
        auto ev = [&](const Vec& d) { return f(PhaseVector::from_joined(d1, z + d)); };
        return (ev(s1 + s2) - ev(s1 - s2) - ev(s2 - s1) + ev(-s1 - s2)) / (4.0 * eps * eps);
    });
}

struct TestFunction {
    ScalarFn f;
    std::function<Vec(const PhaseVector&)> grad1;  // d/dx1, length d1
    std::function<Vec(const PhaseVector&)> grad2;  // d/dx2, length d2
};

struct CommutationResult {
    Vec res1, se1;  // nabla^(1) P f - P nabla^(1) f
    Vec res2, se2;  // P nabla^(2) f - (nabla^(2) P f - Gamma^T nabla^(1) P f)
};

// Both commutation identities estimated on shared draws, so the residuals are
// direct per-draw differences with honest standard errors.
inline CommutationResult commutation_check(const TimeMatrixPath& path, double s, double t,
                                           const PhaseVector& x, const TestFunction& tf,
                                           const McConfig& mc) {
    const int d1 = path.d1, d2 = path.d2, d = d1 + d2;
    std::vector<WeightSpec> specs;
    for (int i = 0; i < d; ++i) {
        Vec e = Vec::Zero(d);
        e(i) = 1.0;
        specs.push_back({s, t, PhaseVector::from_joined(d1, e)});
    }
    const GaussianLaw law = joint_law_specs(path, s, t, x, specs);
    const Mat& L = law.chol();
    const Mat gm = gamma(path, s, t);
    const uint64_t sd = derive_seed(mc.seed, mc.stream_salt);
    auto est = stats::mc_mean_multi(mc.n, d, mc.threads, [&](std::size_t i, std::vector<double>& out) {
        rng::NormalStream st(sd, rng::Purpose::law_sample, i);
        Vec g(law.mean.size());
        for (Eigen::Index k = 0; k < g.size(); ++k) g(k) = st.next();
        const Vec z = law.mean + L * g;
        const PhaseVector X = PhaseVector::from_joined(d1, z.head(d));
        const double fv = tf.f(X);
        const Vec g1 = tf.grad1(X), g2 = tf.grad2(X);
        for (int j = 0; j < d1; ++j) out[j] = fv * z(d + j) - g1(j);
        for (int j = 0; j < d2; ++j) {
            double grad2_pf = fv * z(d + d1 + j);
            double gamma_term = 0.0;
            for (int i1 = 0; i1 < d1; ++i1) gamma_term += gm(i1, j) * fv * z(d + i1);
            out[d1 + j] = g2(j) - (grad2_pf - gamma_term);
        }
    });
    CommutationResult r;
    r.res1.resize(d1);
    r.se1.resize(d1);
    r.res2.resize(d2);
    r.se2.resize(d2);
    for (int j = 0; j < d1; ++j) {
        r.res1(j) = est[j].value;
        r.se1(j) = est[j].se;
    }
    for (int j = 0; j < d2; ++j) {
        r.res2(j) = est[d1 + j].value;
        r.se2(j) = est[d1 + j].se;
    }
    return r;
}

// --- scaling probes -------------------------------------------------------

struct ProbeRow {
    double delta = 0.0;
    double estimate = 0.0;
    double se = 0.0;
};

struct ProbeResult {
    std::vector<ProbeRow> rows;
    LineFit fit;  // log estimate vs log delta
};

namespace detail {
inline ProbeResult fit_ladder(std::vector<ProbeRow> rows) {
    std::vector<double> lx, ly;
    for (const auto& r : rows) {
        lx.push_back(std::log(r.delta));
        ly.push_back(std::log(r.estimate));
    }
    ProbeResult pr;
    pr.rows = std::move(rows);
    pr.fit = fit_line(lx, ly);
    return pr;
}
}  // namespace detail

// ||X^{(block)}_{0,delta}(0)||_p along a delta ladder, Monte Carlo per rung.
inline ProbeResult moment_scaling_probe(const Mat& B, const Mat& sigma, int block, double p,
                                        const std::vector<double>& deltas, const McConfig& mc) {
    if (deltas.size() < 6) throw std::invalid_argument("moment_scaling_probe: need >= 6 ladder points");
    std::vector<ProbeRow> rows;
    const int d1 = static_cast<int>(B.rows());
    uint64_t salt = mc.stream_salt;
    for (double delta : deltas) {
        const auto path = TimeMatrixPath::constant(B, sigma, 0.0, delta);
        const GaussianLaw law = state_law(path, 0.0, delta, PhaseVector::zero(path.d1, path.d2));
        const Mat& L = law.chol();
        McConfig local = mc;
        local.stream_salt = ++salt;
        const uint64_t sd = derive_seed(local.seed, local.stream_salt);
        auto est = stats::mc_mean(mc.n, mc.threads, [&](std::size_t i) {
            rng::NormalStream st(sd, rng::Purpose::law_sample, i);
            Vec g(law.mean.size());
            for (Eigen::Index k = 0; k < g.size(); ++k) g(k) = st.next();
            const Vec z = law.mean + L * g;
            const double nrm = block == 1 ? z.head(d1).norm() : z.tail(z.size() - d1).norm();
            return std::pow(nrm, p);
        });
        const double norm_p = std::pow(est.value, 1.0 / p);
        const double se = est.se / p * std::pow(est.value, 1.0 / p - 1.0);
        rows.push_back({delta, norm_p, se});
    }
    return detail::fit_ladder(std::move(rows));
}

// ||nabla^{(1)} P_{0,delta} f||(0) ladder via the Bismut weights.
inline ProbeResult grad1_scaling_probe(const Mat& B, const Mat& sigma, const ScalarFn& f,
                                       const std::vector<double>& deltas, const McConfig& mc) {
    if (deltas.size() < 6) throw std::invalid_argument("grad1_scaling_probe: need >= 6 ladder points");
    std::vector<ProbeRow> rows;
    uint64_t salt = mc.stream_salt + 1000;
    for (double delta : deltas) {
        const auto path = TimeMatrixPath::constant(B, sigma, 0.0, delta);
        McConfig local = mc;
        local.stream_salt = ++salt;
        auto [grad, se] = bismut_gradient(path, 0.0, delta, PhaseVector::zero(path.d1, path.d2), f, local);
        rows.push_back({delta, grad.head(path.d1).norm(), se.head(path.d1).norm()});
    }
    return detail::fit_ladder(std::move(rows));
}

// Random piecewise path with well-conditioned pieces, for property tests.
inline TimeMatrixPath make_random_path(uint64_t seed, int n_pieces, int d1, int d2, double s,
                                       double t) {
    rng::NormalStream st(seed, rng::Purpose::path_select, 0);
    std::vector<double> breaks{s};
    for (int i = 1; i < n_pieces; ++i) breaks.push_back(s + (t - s) * i / n_pieces);
    breaks.push_back(t);
    std::vector<Mat> bs, sgs;
    for (int i = 0; i < n_pieces; ++i) {
        Mat b = Mat::Zero(d1, d2);
        for (int r = 0; r < d1; ++r)
            for (int c = 0; c < d2; ++c) b(r, c) = (r == c ? 1.0 : 0.0) + 0.3 * st.next();
        Mat sg = Mat::Zero(d2, d2);
        for (int r = 0; r < d2; ++r) {
            for (int c = 0; c < d2; ++c) sg(r, c) = 0.2 * st.next();
            sg(r, r) += 1.0 + 0.5 * std::abs(st.next());
        }
        bs.push_back(b);
        sgs.push_back(sg);
    }
    return TimeMatrixPath(std::move(breaks), std::move(bs), std::move(sgs));
}

}  // namespace hamlab::linear_flow
