#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace muxjba {

// SplitMix64 finalizer; used to derive independent per-shot seeds from
// (master seed, stream path). Counter-based, so any shot's stream can be
// reconstructed without touching the others.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Fold a path of indices (experiment tag, power index, shot index, ...)
/// into a stream seed. Order-sensitive.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = splitmix64(master ^ 0x6a09e667f3bcc909ull);
    for (std::uint64_t p : path) {
        s = splitmix64(s ^ splitmix64(p + 0x632be59bd9b4e019ull));
    }
    return s;
}

/// Deterministic random stream for one Monte Carlo shot.
///
/// Gaussian variates come from an explicit Box-Muller transform so the byte
/// stream does not depend on the standard library's distribution internals.
class ShotRng {
public:
    explicit ShotRng(std::uint64_t seed) : eng_(seed) {}

    /// Uniform in the open interval (0, 1).
    double uniform() {
        return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double phi = 6.283185307179586476925286766559 * uniform();
        spare_ = r * std::sin(phi);
        has_spare_ = true;
        return r * std::cos(phi);
    }

    /// Exponential waiting time with the given rate (s^-1).
    double exponential(double rate) { return -std::log(uniform()) / rate; }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace muxjba
