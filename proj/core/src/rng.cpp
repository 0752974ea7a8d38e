#include "lvmi/rng.hpp"

#include <cmath>

#include "lvmi/special.hpp"

namespace lvmi {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t state = a ^ (b * 0x9e3779b97f4a7c15ULL);
    std::uint64_t out = splitmix64(state);
    return splitmix64(state) ^ rotl(out, 23);
}

std::uint64_t stream_id(Phase phase, std::uint64_t unit) {
    return (static_cast<std::uint64_t>(phase) << 56) ^ unit;
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream)
    : master_seed_(master_seed), stream_(stream) {
    std::uint64_t state = mix_seed(master_seed, stream);
    for (auto& word : s_) word = splitmix64(state);
}

std::uint64_t RngStream::next_u64() {
    // xoshiro256++ (Blackman & Vigna).
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    ++counter_;
    return result;
}

double RngStream::uniform() {
    // 53-bit mantissa, shifted into (0, 1).
    const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return u == 0.0 ? 0x1.0p-54 : u;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RngStream::normal() { return norm_quantile(uniform()); }

double RngStream::exponential() { return -std::log(uniform()); }

}  // namespace lvmi
