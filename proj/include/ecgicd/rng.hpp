#ifndef ECGICD_RNG_HPP
#define ECGICD_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace ecgicd {

// SplitMix64, used to derive independent stream seeds from (seed, index).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic RNG used everywhere randomness is required.
///
/// std::mt19937_64 output is pinned by the standard, but the std
/// distributions are not, so uniform ints, uniform reals and normals are
/// produced here with fixed algorithms (rejection sampling, 53-bit
/// mantissa scaling, Box-Muller). Identical seeds give identical streams
/// on every platform.
class DetRng {
public:
    explicit DetRng(std::uint64_t seed) : engine_(seed) {}

    /// Independent stream `index` derived from `seed` via SplitMix64.
    static DetRng stream(std::uint64_t seed, std::uint64_t index) {
        return DetRng(splitmix64(seed ^ (0x517cc1b727220a95ULL * (index + 1))));
    }

    std::uint64_t u64() { return engine_(); }

    /// Uniform integer in [0, n) by rejection sampling (no modulo bias).
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return v % n;
    }

    /// Uniform double in [0, 1) with 53 random mantissa bits.
    double real01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; consumes two uniforms per pair.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = real01();
        double u2 = real01();
        while (u1 <= 0.0) u1 = real01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Fisher-Yates shuffle.
    template <typename Vec>
    void shuffle(Vec& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace ecgicd

#endif
