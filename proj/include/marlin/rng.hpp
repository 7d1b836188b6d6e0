#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace marlin {

// splitmix64; used to derive independent stream seeds from one master seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return mix_seed(a ^ mix_seed(b));
}

// Seeded random stream. Uniform/normal conversions are spelled out instead of
// going through std distributions so that trajectories are reproducible
// across standard libraries, not just across runs.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // uniform on [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // uniform integer in [0, n). Modulo bias is ~n/2^64, far below anything
    // the statistical tests can resolve.
    std::uint64_t uniform_int(std::uint64_t n) {
        return gen_() % n;
    }

    // standard normal via Box-Muller (no cached spare, so copies of the
    // stream state behave identically)
    double normal() {
        double u1 = 1.0 - uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // circularly symmetric complex Gaussian CN(0, 1): E|z|^2 = 1
    std::complex<double> cnormal() {
        static constexpr double kHalf = 0.70710678118654752440;
        return {normal() * kHalf, normal() * kHalf};
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace marlin
