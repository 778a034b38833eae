#pragma once

#include <cmath>
#include <cstdint>

namespace pipect {

/// Deterministic random generator: xoshiro256++ seeded through SplitMix64,
/// with tagged substreams.
///
/// Substream rule: `stream(tag)` derives an independent generator whose seed
/// is splitmix64(root_seed XOR (0x9E3779B97F4A7C15 * (tag + 1))). Every
/// seeded operation in this project takes its own substream of the run seed,
/// so outputs are reproducible from (config, seed) alone and independent of
/// call order elsewhere in the program.
///
/// normal() uses the Box-Muller transform (pairs cached), so the normal
/// stream is identical across platforms and standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : root_seed_(seed) {
        std::uint64_t s = seed;
        for (auto& w : state_) w = splitmix64(s);
    }

    /// Independent substream tagged by `tag` (see class comment).
    Rng stream(std::uint64_t tag) const {
        std::uint64_t s = root_seed_ ^ (0x9E3779B97F4A7C15ull * (tag + 1));
        splitmix64(s);
        return Rng(s);
    }

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

    /// Uniform double in (0, 1].
    double uniform() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Standard normal deviate.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    std::uint64_t root_seed() const { return root_seed_; }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    static std::uint64_t splitmix64(std::uint64_t& s) {
        std::uint64_t z = (s += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t root_seed_;
    std::uint64_t state_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Substream tags for the seeded operations (documented reproducibility map).
namespace rng_streams {
inline constexpr std::uint64_t kSimulateNoise = 1;
inline constexpr std::uint64_t kChain = 2;
inline constexpr std::uint64_t kPixelProbe = 3;
}  // namespace rng_streams

}  // namespace pipect
