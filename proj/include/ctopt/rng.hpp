#pragma once

#include <cstdint>

namespace ctopt {

/// splitmix64 state advance + finalizer. Self-contained so every stochastic
/// path in the toolkit is reproducible independent of the standard library.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Mixes up to three 64-bit keys into one seed value.
inline std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = a;
    std::uint64_t h = splitmix64(s);
    s ^= b + 0x9e3779b97f4a7c15ull;
    h ^= splitmix64(s);
    s ^= c + 0xc2b2ae3d27d4eb4full;
    h ^= splitmix64(s);
    return h;
}

/// Counter-based deterministic generator: the stream is a pure function of
/// the key it was constructed with.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t key) : state_(key) {}
    CounterRng(std::uint64_t seed, std::uint64_t id, std::uint64_t counter)
        : state_(mix_keys(seed, id, counter)) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double next_double(double lo, double hi) { return lo + next_double() * (hi - lo); }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller.
    double next_gaussian();

  private:
    std::uint64_t state_;
};

/// Poisson sample; Knuth multiplication for small means, rounded gaussian
/// approximation for large ones.
long sample_poisson(double mean, CounterRng& rng);

} // namespace ctopt
