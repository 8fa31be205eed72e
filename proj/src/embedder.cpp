#include "tttnn/embedder.hpp"

#include <cmath>
#include <stdexcept>

#include "tttnn/errors.hpp"

namespace tttnn {

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

Embedding embed(std::string_view text, std::size_t dim, std::size_t n) {
    if (dim < 2) {
        throw ConfigError("embedding dim must be >= 2");
    }
    if (n < 1) {
        throw ConfigError("n-gram length must be >= 1");
    }

    Embedding e;
    e.values.assign(dim, 0.0);
    if (text.size() >= n) {
        for (std::size_t i = 0; i + n <= text.size(); ++i) {
            std::uint64_t h = fnv1a64(text.substr(i, n));
            double sign = (h >> 63) ? -1.0 : 1.0;
            e.values[h % dim] += sign;
        }
    }

    double norm_sq = 0.0;
    for (double v : e.values) {
        norm_sq += v * v;
    }
    if (norm_sq > 0.0) {
        double inv = 1.0 / std::sqrt(norm_sq);
        for (double& v : e.values) {
            v *= inv;
        }
    }
    return e;
}

double squared_l2(const Embedding& a, const Embedding& b) {
    if (a.dim() != b.dim()) {
        throw DimensionMismatch("embedding dims differ: " + std::to_string(a.dim()) +
                                " vs " + std::to_string(b.dim()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        double d = a.values[i] - b.values[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace tttnn
