#pragma once

// Counter-based random numbers (Philox4x32-10). Every consumer derives its
// stream from (seed, stream tag, index), so results do not depend on how work
// is partitioned across threads.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace posi {

class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter encrypt(Counter ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85;
};

// Stream tags keep the draws of unrelated computations independent.
enum class StreamTag : std::uint32_t {
    max_statistic = 1,
    coverage = 2,
    special_design = 3,
};

// Sequential generator over one (seed, tag, index) stream.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, StreamTag tag, std::uint64_t index) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          tag_(static_cast<std::uint32_t>(tag)),
          index_(index) {}

    std::uint32_t next_u32() noexcept {
        if (used_ == 4) refill();
        return buffer_[used_++];
    }

    // Uniform on the open interval (0, 1) with 53 random bits.
    double uniform() noexcept {
        const std::uint64_t hi = next_u32() >> 5;  // 27 bits
        const std::uint64_t lo = next_u32() >> 6;  // 26 bits
        const std::uint64_t bits = (hi << 26) | lo;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    // Box-Muller; both variates of a pair are used.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    // Marsaglia-Tsang; shape < 1 handled with the U^{1/shape} boost.
    double gamma(double shape) noexcept {
        if (shape < 1.0) {
            const double g = gamma(shape + 1.0);
            return g * std::pow(uniform(), 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = 0.0;
            double v = 0.0;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double chi_square(double df) noexcept { return 2.0 * gamma(0.5 * df); }

private:
    void refill() noexcept {
        Philox4x32::Counter ctr{block_, tag_, static_cast<std::uint32_t>(index_),
                                static_cast<std::uint32_t>(index_ >> 32)};
        buffer_ = Philox4x32::encrypt(ctr, key_);
        ++block_;
        used_ = 0;
    }

    Philox4x32::Key key_;
    std::uint32_t tag_;
    std::uint64_t index_;
    std::uint32_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int used_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace posi
