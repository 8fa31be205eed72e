#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace tttnn {

// Unit-norm (or zero) feature-hashed text embedding. Deterministic across
// platforms: the vector is a pure function of the input bytes.
struct Embedding {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
};

inline constexpr std::size_t kDefaultEmbedDim = 256;
inline constexpr std::size_t kDefaultNgram = 3;

// FNV-1a over an arbitrary byte window.
std::uint64_t fnv1a64(std::string_view bytes);

// Signed feature hashing of contiguous byte n-grams, L2-normalized.
// Each n-gram adds +/-1 (sign from the hash's top bit) to component
// hash % dim. Texts shorter than n produce the zero vector.
Embedding embed(std::string_view text,
                std::size_t dim = kDefaultEmbedDim,
                std::size_t n = kDefaultNgram);

// Queries use the same mapping as corpus documents.
inline Embedding embed_query(std::string_view text,
                             std::size_t dim = kDefaultEmbedDim,
                             std::size_t n = kDefaultNgram) {
    return embed(text, dim, n);
}

// Squared L2 distance with 64-bit accumulation.
double squared_l2(const Embedding& a, const Embedding& b);

}  // namespace tttnn
