#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ocsim {

// Mixes a salt into a base seed (splitmix64 finalizer). Used everywhere a
// sub-stream is forked from a run seed, so streams never alias.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic noise source. Gaussian draws use the Marsaglia polar method
// over mt19937_64 (whose output is fixed by the standard) instead of
// std::normal_distribution, so a seed reproduces the same bytes on every
// compiler.
class NoiseStream {
public:
    explicit NoiseStream(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Standard normal.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    double gaussian(double sigma) { return sigma * gaussian(); }

    // Unbiased-enough index draw for shuffles (modulo bias is irrelevant at
    // the dataset sizes involved, and it keeps the sequence portable).
    std::size_t index(std::size_t bound) { return static_cast<std::size_t>(gen_() % bound); }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace ocsim
