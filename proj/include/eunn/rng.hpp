#pragma once

#include <cmath>
#include <cstdint>

namespace eunn {

/// Deterministic 64-bit generator: xoshiro256++ (Blackman & Vigna), seeded
/// through splitmix64 so any seed yields a well-mixed state. All sampling is
/// built from explicit integer arithmetic plus libm, so a given seed produces
/// the same stream on every run of the same build. Never use the platform
/// default engine anywhere in the library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t x = seed;
        for (auto& s : state_) s = splitmix64(x);
    }

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Child generator with an independent stream, derived deterministically
    /// from this one's sequence. Splitting advances the parent by one draw.
    Rng split() { return Rng(next_u64() ^ 0x9e3779b97f4a7c15ull); }

    /// Uniform in [0, 1), 53 random bits.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform index in [0, n). Modulo bias is < n / 2^64, irrelevant at the
    /// alphabet sizes used here.
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    /// Standard normal pair (Box-Muller). Consumes exactly two uniforms, no
    /// cached state, so streams stay reproducible under splitting.
    void normal_pair(double& a, double& b) {
        const double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * pi * u2;
        a = r * std::cos(t);
        b = r * std::sin(t);
    }

    double normal() {
        double a, b;
        normal_pair(a, b);
        return a;
    }

private:
    static constexpr double pi = 3.14159265358979323846;

    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    std::uint64_t seed_;
    std::uint64_t state_[4];
};

}  // namespace eunn
