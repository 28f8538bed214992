#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace largen {

// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key);

// Counter-based stream keyed by (experiment, chain, draw). A stream is cheap to
// construct, so every logical draw (one GFF sample, one HMC trajectory) gets its
// own stream and nothing beyond the three keys needs to be checkpointed.
class Stream {
public:
    using result_type = std::uint64_t;

    Stream(std::uint64_t experiment, std::uint64_t chain, std::uint64_t draw);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();
    double uniform();  // in (0, 1)
    double normal();   // standard Gaussian, Box-Muller

    std::uint64_t experiment() const { return experiment_; }
    std::uint64_t chain() const { return chain_; }
    std::uint64_t draw() const { return draw_; }

private:
    void refill();

    std::uint64_t experiment_, chain_, draw_;
    std::array<std::uint32_t, 2> key_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int used_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace largen
