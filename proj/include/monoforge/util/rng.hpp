#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace monoforge {

// Seeded RNG with portable derived draws. mt19937_64's raw output is
// pinned by the standard, but std::uniform_int_distribution is not, so
// bounded draws are rolled by hand (rejection sampling) to keep streams
// byte-identical across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, n). n == 0 is a caller bug; returns 0.
    uint64_t next_below(uint64_t n) {
        if (n <= 1) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return v % n;
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double next_unit() { return (gen_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller (hand-rolled for the same portability
    // reason as next_below; std::normal_distribution is not pinned).
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - next_unit();  // (0, 1]
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[next_below(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace monoforge
