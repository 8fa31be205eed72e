#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include "tttnn/errors.hpp"
#include "tttnn/metrics.hpp"
#include "tttnn/rng.hpp"

using tttnn::MetricsTriple;
using tttnn::ScoredRecord;
using tttnn::aggregate;
using tttnn::compute_metrics;
using tttnn::count_words;

TEST_CASE("count_words splits on the six whitespace bytes") {
    CHECK(count_words("") == 0);
    CHECK(count_words("   \t\n\r\v\f ") == 0);
    CHECK(count_words("one") == 1);
    CHECK(count_words("hello world") == 2);
    CHECK(count_words("  leading and trailing  ") == 3);
    CHECK(count_words("a\tb\nc\rd\ve\ff") == 6);
    CHECK(count_words("double  space") == 2);
    CHECK(count_words("punctuation, counts; as part-of words.") == 5);
}

TEST_CASE("uniform distribution over 257 symbols gives byte perplexity 257") {
    // 100 bytes at nll = ln(257) nats each.
    const double nll = 554.907608489522;
    const MetricsTriple t = compute_metrics(nll, 100, 20);
    CHECK(t.byte_perplexity == doctest::Approx(257.0).epsilon(1e-12));
    CHECK(t.bits_per_byte == doctest::Approx(8.005624549193879).epsilon(1e-12));
    // 100 bytes / 20 words = 5 bytes per word, so 257^5.
    CHECK(t.word_perplexity == doctest::Approx(1121154893057.0).epsilon(1e-9));
    CHECK(t.total_nll_nats == nll);
    CHECK(t.n_bytes == 100);
    CHECK(t.n_words == 20);
}

TEST_CASE("bits per byte is the log2 of byte perplexity") {
    tttnn::Rng rng(404);
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t bytes = 1 + rng.next_below(5000);
        const std::uint64_t words = 1 + rng.next_below(bytes);
        const double nll = rng.next_unit() * 10.0 * static_cast<double>(bytes);
        const MetricsTriple t = compute_metrics(nll, bytes, words);
        const double rel = std::abs(t.bits_per_byte - std::log2(t.byte_perplexity)) /
                           std::max(std::abs(t.bits_per_byte), 1e-12);
        CHECK(rel < 1e-9);
    }
}

TEST_CASE("zero nll means perplexity one and zero bits") {
    const MetricsTriple t = compute_metrics(0.0, 10, 2);
    CHECK(t.byte_perplexity == 1.0);
    CHECK(t.word_perplexity == 1.0);
    CHECK(t.bits_per_byte == 0.0);
}

TEST_CASE("degenerate inputs are rejected") {
    CHECK_THROWS_AS(compute_metrics(1.0, 0, 5), tttnn::DegenerateInput);
    CHECK_THROWS_AS(compute_metrics(1.0, 5, 0), tttnn::DegenerateInput);
    CHECK_THROWS_AS(
        compute_metrics(std::numeric_limits<double>::quiet_NaN(), 5, 1),
        tttnn::DegenerateInput);
    CHECK_THROWS_AS(
        compute_metrics(std::numeric_limits<double>::infinity(), 5, 1),
        tttnn::DegenerateInput);
}

TEST_CASE("aggregate pools counts before computing") {
    const std::vector<ScoredRecord> recs = {{10.0, 4, 1}, {2.0, 16, 3}};
    const MetricsTriple t = aggregate(recs);
    CHECK(t.total_nll_nats == 12.0);
    CHECK(t.n_bytes == 20);
    CHECK(t.n_words == 4);
    CHECK(t.byte_perplexity == doctest::Approx(std::exp(12.0 / 20.0)).epsilon(1e-12));

    // Pooling is not the mean of per-record metrics: the records have byte
    // perplexities exp(2.5) and exp(0.125), whose mean is far above the
    // pooled exp(0.6).
    const double mean_ppl = (std::exp(10.0 / 4.0) + std::exp(2.0 / 16.0)) / 2.0;
    CHECK(t.byte_perplexity < mean_ppl);
}

TEST_CASE("aggregate of a single record equals compute_metrics") {
    const MetricsTriple a = aggregate({{7.5, 12, 3}});
    const MetricsTriple b = compute_metrics(7.5, 12, 3);
    CHECK(a.bits_per_byte == b.bits_per_byte);
    CHECK(a.byte_perplexity == b.byte_perplexity);
    CHECK(a.word_perplexity == b.word_perplexity);
}

TEST_CASE("aggregate rejects an empty record list") {
    CHECK_THROWS_AS(aggregate({}), tttnn::DegenerateInput);
}
