#pragma once

#include <cstdint>
#include <random>

namespace blfuse {

/// Derives an independent seed for a named sub-stream (market, method,
/// bootstrap replicate, ...) from a parent seed via splitmix64.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream);

/// Seeded generator with platform-independent draws. The standard library's
/// distributions are implementation-defined, so uniform and normal variates
/// are built directly on the 64-bit Mersenne twister output.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal (Box-Muller, caching the second variate).
    double normal();

    /// Uniform integer in [0, n), n > 0, without modulo bias.
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace blfuse
