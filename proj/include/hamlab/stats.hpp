#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "hamlab/common.hpp"
#include "hamlab/parallel.hpp"

namespace hamlab::stats {

// Running sums for one scalar stream. Blocks combine in index order (pairwise
// over a fixed block layout), which keeps reductions shard-count invariant.
struct Accum {
    double sum = 0.0;
    double sumsq = 0.0;
    std::size_t n = 0;

    void add(double v) {
        sum += v;
        sumsq += v * v;
        ++n;
    }
    void merge(const Accum& o) {
        sum += o.sum;
        sumsq += o.sumsq;
        n += o.n;
    }
    double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
    double variance() const {
        if (n < 2) return 0.0;
        const double m = mean();
        const double v = (sumsq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
        return v > 0 ? v : 0.0;
    }
    double stderr_mean() const { return n ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
};

inline Accum merge_in_order(const std::vector<Accum>& blocks) {
    Accum total;
    for (const auto& b : blocks) total.merge(b);
    return total;
}

// Several correlated scalar streams sharing one pass (e.g. components of a
// vector estimator).
struct MultiAccum {
    std::vector<Accum> acc;
    explicit MultiAccum(std::size_t k = 0) : acc(k) {}
    void add(const std::vector<double>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) acc[i].add(v[i]);
    }
    void merge(const MultiAccum& o) {
        if (acc.empty()) acc.resize(o.acc.size());
        for (std::size_t i = 0; i < o.acc.size(); ++i) acc[i].merge(o.acc[i]);
    }
};

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

// Deterministic parallel Monte Carlo mean of fn(unit) over n units.
template <class Fn>
Estimate mc_mean(std::size_t n, unsigned threads, Fn fn) {
    auto blocks = par::run_blocks<Accum>(n, threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
        Accum a;
        for (std::size_t i = lo; i < hi; ++i) a.add(fn(i));
        return a;
    });
    const Accum total = merge_in_order(blocks);
    return {total.mean(), total.stderr_mean()};
}

template <class Fn>
std::vector<Estimate> mc_mean_multi(std::size_t n, std::size_t k, unsigned threads, Fn fn) {
    auto blocks =
        par::run_blocks<MultiAccum>(n, threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
            MultiAccum a(k);
            std::vector<double> v(k);
            for (std::size_t i = lo; i < hi; ++i) {
                fn(i, v);
                a.add(v);
            }
            return a;
        });
    MultiAccum total(k);
    for (const auto& b : blocks) total.merge(b);
    std::vector<Estimate> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = {total.acc[i].mean(), total.acc[i].stderr_mean()};
    return out;
}

inline double binomial_stderr(double p_hat, std::size_t n) {
    if (n == 0) return 0.0;
    return std::sqrt(std::max(p_hat * (1.0 - p_hat), 0.0) / static_cast<double>(n));
}

}  // namespace hamlab::stats
