#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "hamlab/common.hpp"

namespace hamlab::rng {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
// A draw is addressed by (seed, purpose, unit, counter), so any sample of any
// stream can be regenerated independently of thread or shard layout.

namespace detail {

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
    const uint64_t p = static_cast<uint64_t>(a) * b;
    hi = static_cast<uint32_t>(p >> 32);
    lo = static_cast<uint32_t>(p);
}

inline std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key) {
    constexpr uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        uint32_t hi0, lo0, hi1, lo1;
        mulhilo(M0, ctr[0], hi0, lo0);
        mulhilo(M1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += W0;
        key[1] += W1;
    }
    return ctr;
}

inline double to_unit_interval(uint32_t a, uint32_t b) {
    const uint64_t v = (static_cast<uint64_t>(a) << 32) | b;
    // 53 mantissa bits, offset so the result lies strictly inside (0,1)
    return static_cast<double>(v >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

}  // namespace detail

// Stream purposes; appending new entries never perturbs existing streams.
enum class Purpose : uint32_t {
    law_sample = 1,
    fd_sample = 2,
    brownian = 3,
    path_select = 4,
    generic = 5,
};

// i.i.d. N(0,1) stream identified by (seed, purpose, unit).
class NormalStream {
  public:
    NormalStream(uint64_t seed, Purpose purpose, uint64_t unit)
        : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
          base_{static_cast<uint32_t>(purpose), static_cast<uint32_t>(unit),
                static_cast<uint32_t>(unit >> 32), 0} {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        auto ctr = base_;
        ctr[3] = draw_++;
        const auto r = detail::philox4x32(ctr, key_);
        const double u1 = detail::to_unit_interval(r[0], r[1]);
        const double u2 = detail::to_unit_interval(r[2], r[3]);
        const double rad = std::sqrt(-2.0 * std::log(u1));
        spare_ = rad * std::sin(2.0 * kPi * u2);
        have_spare_ = true;
        return rad * std::cos(2.0 * kPi * u2);
    }

    Vec next_vec(Eigen::Index n) {
        Vec v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = next();
        return v;
    }

    double next_uniform() {
        auto ctr = base_;
        ctr[3] = draw_++;
        const auto r = detail::philox4x32(ctr, key_);
        return detail::to_unit_interval(r[0], r[1]);
    }

  private:
    std::array<uint32_t, 2> key_;
    std::array<uint32_t, 4> base_;
    uint32_t draw_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace hamlab::rng
