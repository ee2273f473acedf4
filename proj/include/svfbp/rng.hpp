#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>

namespace svfbp {

/// Deterministic RNG. Distribution transforms are hand-rolled so that a
/// given seed produces the same stream on every platform and standard
/// library (std::mt19937_64 itself is fully specified, the std
/// distributions are not).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t bits() { return eng_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(uniform() * static_cast<double>(hi - lo + 1));
    }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform random rotation as a 3x3 matrix (rows), via a uniform unit
    /// quaternion.
    std::array<std::array<double, 3>, 3> rotation_matrix() {
        double u1 = uniform(), u2 = uniform(), u3 = uniform();
        double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
        double w = a * std::sin(2.0 * M_PI * u2);
        double x = a * std::cos(2.0 * M_PI * u2);
        double y = b * std::sin(2.0 * M_PI * u3);
        double z = b * std::cos(2.0 * M_PI * u3);
        return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
                 {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
                 {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
    }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace svfbp
