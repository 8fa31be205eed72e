#include "tttnn/metrics.hpp"

#include <cmath>
#include <numbers>

#include "tttnn/errors.hpp"

namespace tttnn {

namespace {

bool is_word_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
           c == '\f';
}

}  // namespace

std::uint64_t count_words(std::string_view text) {
    std::uint64_t words = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        if (is_word_space(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++words;
        }
    }
    return words;
}

MetricsTriple compute_metrics(double total_nll_nats, std::uint64_t n_bytes,
                              std::uint64_t n_words) {
    if (n_bytes == 0) throw DegenerateInput("metrics: zero scored bytes");
    if (n_words == 0) throw DegenerateInput("metrics: zero words");
    if (!std::isfinite(total_nll_nats))
        throw DegenerateInput("metrics: non-finite nll sum");
    MetricsTriple t;
    t.total_nll_nats = total_nll_nats;
    t.n_bytes = n_bytes;
    t.n_words = n_words;
    t.byte_perplexity = std::exp(total_nll_nats / static_cast<double>(n_bytes));
    t.word_perplexity = std::exp(total_nll_nats / static_cast<double>(n_words));
    t.bits_per_byte =
        total_nll_nats / (static_cast<double>(n_bytes) * std::numbers::ln2);
    return t;
}

MetricsTriple aggregate(const std::vector<ScoredRecord>& records) {
    if (records.empty()) throw DegenerateInput("metrics: no records to pool");
    double nll = 0.0;
    std::uint64_t bytes = 0;
    std::uint64_t words = 0;
    for (const ScoredRecord& r : records) {
        nll += r.nll_nats;
        bytes += r.n_bytes;
        words += r.n_words;
    }
    return compute_metrics(nll, bytes, words);
}

}  // namespace tttnn
