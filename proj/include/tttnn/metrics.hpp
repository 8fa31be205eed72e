#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace tttnn {

struct MetricsTriple {
    double bits_per_byte = 0.0;
    double byte_perplexity = 1.0;
    double word_perplexity = 1.0;
    double total_nll_nats = 0.0;
    std::uint64_t n_bytes = 0;
    std::uint64_t n_words = 0;
};

// Number of maximal runs of non-whitespace bytes. Whitespace is fixed to
// space, \t, \n, \r, \v, \f so word perplexity is reproducible byte for byte.
std::uint64_t count_words(std::string_view text);

// byte_perplexity = exp(nll / n_bytes), word_perplexity = exp(nll / n_words),
// bits_per_byte = nll / (n_bytes * ln 2), all from summed nats. Throws
// DegenerateInput for zero counts or a non-finite sum.
MetricsTriple compute_metrics(double total_nll_nats, std::uint64_t n_bytes,
                              std::uint64_t n_words);

struct ScoredRecord {
    double nll_nats = 0.0;
    std::uint64_t n_bytes = 0;
    std::uint64_t n_words = 0;
};

// Corpus-level pooling: sum nll, bytes and words across all records, then
// compute once. Deliberately not a mean of per-document metrics; the two
// disagree whenever documents differ.
MetricsTriple aggregate(const std::vector<ScoredRecord>& records);

}  // namespace tttnn
