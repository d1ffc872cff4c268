#pragma once

// Counter-based Gaussian noise. Every increment is a pure function of
// (seed, replication, particle, absolute step, coordinate), so results do
// not depend on evaluation order or thread count, and grids sharing a step
// lattice see the same Brownian increments where they overlap.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>

namespace omv {

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class NoiseSource {
public:
    constexpr explicit NoiseSource(std::uint64_t seed = 0) noexcept : seed_(seed) {}

    [[nodiscard]] constexpr std::uint64_t seed() const noexcept { return seed_; }

    /// Independent source for a named sub-experiment.
    [[nodiscard]] constexpr NoiseSource derive(std::uint64_t tag) const noexcept {
        return NoiseSource(splitmix64(seed_ ^ splitmix64(tag + 0x632be59bd9b4e019ULL)));
    }
    [[nodiscard]] constexpr NoiseSource derive(std::string_view tag) const noexcept {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : tag) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
        return derive(h);
    }

    /// Standard normals for one (replication, particle, step).
    void normals(std::uint64_t replication, std::uint64_t particle, std::int64_t step,
                 std::span<double> out) const noexcept {
        std::uint64_t key = splitmix64(seed_ ^ splitmix64(replication));
        key = splitmix64(key ^ splitmix64(particle + 0x2545f4914f6cdd1dULL));
        key = splitmix64(key ^ static_cast<std::uint64_t>(step));
        for (std::size_t j = 0; j < out.size(); j += 2) {
            const std::uint64_t a = splitmix64(key + 2 * j + 1);
            const std::uint64_t b = splitmix64(key + 2 * j + 2);
            // u1 in (0, 1], u2 in [0, 1)
            const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
            const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
            const double r = std::sqrt(-2.0 * std::log(u1));
            const double theta = 2.0 * std::numbers::pi * u2;
            out[j] = r * std::cos(theta);
            if (j + 1 < out.size()) out[j + 1] = r * std::sin(theta);
        }
    }

    /// Brownian increment over a step of length h: normals scaled by sqrt(h).
    void increment(std::uint64_t replication, std::uint64_t particle, std::int64_t step,
                   double sqrt_h, std::span<double> out) const noexcept {
        normals(replication, particle, step, out);
        for (double& v : out) v *= sqrt_h;
    }

private:
    std::uint64_t seed_;
};

}  // namespace omv
