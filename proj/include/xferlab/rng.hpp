#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>
#include <vector>

#include "common.hpp"

namespace xferlab {

/// splitmix64 finalizer; decorrelates stream seeds derived from one root seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d0649bb9464489ull;
    return x ^ (x >> 31);
}

/// Deterministic RNG wrapper. All randomness in the library flows through
/// named streams derived from (root seed, stream name, index), so consuming
/// draws on one stream never shifts another. Normals use Box-Muller without
/// caching the second deviate: draws per call are fixed, which keeps streams
/// bit-reproducible across standard library implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    static std::uint64_t stream_seed(std::uint64_t root, std::string_view name, std::uint64_t index = 0) {
        std::uint64_t h = fnv1a64(name);
        return splitmix64(root ^ splitmix64(h + 0x632be59bd9b4e019ull * index));
    }

    static Rng stream(std::uint64_t root, std::string_view name, std::uint64_t index = 0) {
        return Rng(stream_seed(root, name, index));
    }

    /// Uniform in [0, 1). 53-bit mantissa construction, engine-portable.
    double uniform() {
        return double(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; always consumes exactly two uniforms.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Integer in [0, n).  Rejection-free multiply-shift would bias for huge n;
    /// modulo of a 64-bit draw is fine for the n << 2^32 sizes used here.
    std::uint64_t index(std::uint64_t n) {
        require(n > 0, ErrorCode::Precondition, "index() with n == 0");
        return gen_() % n;
    }

    std::vector<double> normal_vec(std::size_t n) {
        std::vector<double> v(n);
        for (auto& x : v) x = normal();
        return v;
    }

    std::mt19937_64& engine() { return gen_; }

  private:
    std::mt19937_64 gen_;
};

}  // namespace xferlab
