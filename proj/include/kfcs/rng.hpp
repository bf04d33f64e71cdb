#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace kfcs {

/// splitmix64 step; used to derive independent child seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Roles of the independent random streams inside one experiment.
/// Changing the draws of one role never perturbs another.
enum class SeedRole : std::uint64_t {
    Matrix = 1,
    Schedule = 2,
    Signal = 3,
    Noise = 4,
};

/// Deterministic child seed for (master, trial, role).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t trial, SeedRole role) {
    return splitmix64(splitmix64(splitmix64(master) + trial) + static_cast<std::uint64_t>(role));
}

/// Seeded random stream with a platform-independent draw sequence.
///
/// mt19937_64 output is fixed by the standard; uniforms come from the top
/// 53 bits and normals from the Marsaglia polar transform, so identical
/// seeds give identical sequences everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n).
    int uniform_int(int n) {
        return static_cast<int>(uniform() * static_cast<double>(n));
    }

    /// Standard normal via Marsaglia polar rejection (second value discarded
    /// to keep the stream a pure function of the call sequence).
    double normal() {
        for (;;) {
            const double u = 2.0 * uniform() - 1.0;
            const double v = 2.0 * uniform() - 1.0;
            const double s = u * u + v * v;
            if (s > 0.0 && s < 1.0) {
                return u * std::sqrt(-2.0 * std::log(s) / s);
            }
        }
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Zero-mean normal with the given sigma, rejected until |x| <= cutoff.
    double truncated_normal(double sigma, double cutoff) {
        if (sigma == 0.0) return 0.0;
        for (;;) {
            const double x = sigma * normal();
            if (std::abs(x) <= cutoff) return x;
        }
    }

private:
    std::mt19937_64 engine_;
};

} // namespace kfcs
