#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

namespace kgbias {

// Deterministic RNG used for every random draw in the library.
// Distributions are generated from the raw engine output instead of
// std::<*>_distribution, so results do not depend on the standard
// library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(splitmix(seed ^ 0x9e3779b97f4a7c15ull)) {
        // warm up so small seeds decorrelate
        next_u64();
        next_u64();
    }

    std::uint64_t next_u64() {
        // xorshift* variant; state advanced by splitmix for full period seeds
        state_ = splitmix(state_);
        return state_;
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n); n > 0
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    // standard normal via Box-Muller
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = mag * std::sin(2.0 * std::numbers::pi * u2);
        have_spare_ = true;
        return mag * std::cos(2.0 * std::numbers::pi * u2);
    }

    // in-place Fisher-Yates
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Stable per-stage seed derivation: derive_seed(seed, "split") etc.
    static std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
        std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
        for (const char c : tag) {
            h ^= static_cast<std::uint8_t>(c);
            h *= 0x100000001b3ull;
        }
        return splitmix(seed ^ h);
    }

private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace kgbias
