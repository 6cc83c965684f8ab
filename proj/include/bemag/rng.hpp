#pragma once

// Self-contained deterministic random number generation. The standard
// library distributions are implementation-defined, which would break the
// bit-reproducibility contract of seeded scans across toolchains, so the
// few samplers needed here are spelled out explicitly.

#include <cmath>
#include <cstdint>

namespace bemag::rng {

// splitmix64 core (Vigna). Passes BigCrush, one multiply-xor pipeline.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in (0, 1), never exactly 0 or 1.
    double next_double() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    // Standard normal, Box-Muller.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u = next_double();
        const double v = next_double();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double theta = 6.283185307179586476925286766559 * v;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Poisson variate. Exact multiplicative method below mean 30, rounded
    // Gaussian above (fractional bias is irrelevant at those counts).
    long long poisson(double mean) {
        if (!(mean > 0.0)) return 0;
        if (mean < 30.0) {
            const double limit = std::exp(-mean);
            long long k = 0;
            double prod = next_double();
            while (prod > limit) {
                ++k;
                prod *= next_double();
            }
            return k;
        }
        const double x = mean + std::sqrt(mean) * gaussian();
        return x > 0.0 ? static_cast<long long>(std::llround(x)) : 0;
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace bemag::rng
