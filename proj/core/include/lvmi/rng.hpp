#pragma once

#include <cstdint>

namespace lvmi {

// Stream phases. A stream is keyed by (master_seed, phase, unit index), so
// per-unit chains are reproducible no matter which worker runs them or in
// what order units are processed.
enum class Phase : std::uint64_t {
    FitInit = 1,
    FitSweep = 2,
    ImputeSweep = 3,
    DataGenParams = 4,
    DataGenData = 5,
    Truth = 6,
    IsLoglik = 7,
    Analysis = 8,
    Test = 15,
};

// 64-bit mixing (splitmix64 finalizer); also used to derive per-replicate
// and per-grid-cell seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

std::uint64_t stream_id(Phase phase, std::uint64_t unit);

// Seeded xoshiro256++ stream. Identical (master_seed, stream_id) give
// bit-identical draw sequences; the counter records the number of 64-bit
// outputs consumed.
class RngStream {
public:
    RngStream() : RngStream(0, 0) {}
    RngStream(std::uint64_t master_seed, std::uint64_t stream);
    RngStream(std::uint64_t master_seed, Phase phase, std::uint64_t unit)
        : RngStream(master_seed, stream_id(phase, unit)) {}

    std::uint64_t next_u64();

    // Uniform on (0, 1), 53-bit resolution, endpoints excluded.
    double uniform();
    // Uniform on (lo, hi).
    double uniform(double lo, double hi);
    // Standard normal via the inverse CDF (deterministic, no cached state).
    double normal();
    // Exponential(1).
    double exponential();

    std::uint64_t counter() const { return counter_; }
    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    std::uint64_t s_[4];
    std::uint64_t counter_ = 0;
    std::uint64_t master_seed_ = 0;
    std::uint64_t stream_ = 0;
};

}  // namespace lvmi
