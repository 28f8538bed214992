#include "largen/rng.hpp"

#include <cmath>
#include <numbers>

namespace largen {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t(kM0) * c[0];
        const std::uint64_t p1 = std::uint64_t(kM1) * c[2];
        const std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
        const std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kW0;
        k[1] += kW1;
    }
    return c;
}

Stream::Stream(std::uint64_t experiment, std::uint64_t chain, std::uint64_t draw)
    : experiment_(experiment), chain_(chain), draw_(draw) {
    const std::uint64_t k = splitmix(experiment ^ splitmix(chain));
    key_ = {std::uint32_t(k), std::uint32_t(k >> 32)};
}

void Stream::refill() {
    buf_ = philox4x32({std::uint32_t(block_), std::uint32_t(block_ >> 32),
                       std::uint32_t(draw_), std::uint32_t(draw_ >> 32)},
                      key_);
    ++block_;
    used_ = 0;
}

Stream::result_type Stream::operator()() {
    if (used_ > 2) refill();
    const std::uint64_t r = std::uint64_t(buf_[used_]) | (std::uint64_t(buf_[used_ + 1]) << 32);
    used_ += 2;
    return r;
}

double Stream::uniform() {
    // 53 random bits, shifted off zero
    return (double((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
}

}  // namespace largen
