#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace tttnn {

// Deterministic RNG built on mt19937_64, whose output sequence is fixed by
// the standard. Distribution shaping is done here rather than with
// std::normal_distribution / std::shuffle, whose algorithms are
// implementation-defined and would break cross-platform byte equality.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double next_unit() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller. One fresh pair per call; the spare
    // value is discarded to keep the consumption pattern position-independent.
    double next_normal() {
        constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
        double u1 = next_unit();
        double u2 = next_unit();
        while (u1 == 0.0) u1 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
    }

    // Uniform integer in [0, bound). Modulo bias is irrelevant here; what
    // matters is that the result is identical on every platform.
    std::uint64_t next_below(std::uint64_t bound) {
        return gen_() % bound;
    }

    // Fisher-Yates with an explicit index derivation.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace tttnn
