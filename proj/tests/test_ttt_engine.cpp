#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tttnn/corpus_gen.hpp"
#include "tttnn/corpus_store.hpp"
#include "tttnn/embedder.hpp"
#include "tttnn/errors.hpp"
#include "tttnn/ttt_engine.hpp"

using namespace tttnn;

namespace {

ModelConfig small_model(std::uint64_t seed) {
    ModelConfig cfg;
    cfg.vocab = kByteVocab;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.d_ff = 32;
    cfg.context = 64;
    cfg.seed = seed;
    return cfg;
}

TttConfig small_ttt(std::size_t k, double lr) {
    TttConfig cfg;
    cfg.k = k;
    cfg.batch_size = 4;
    cfg.lr = lr;
    cfg.embed_dim = 32;
    return cfg;
}

// Retrieval test double serving a fixed corpus of texts; distances follow
// the real embedding metric, ordering follows the real total order.
class FixtureRetriever : public Retriever {
public:
    explicit FixtureRetriever(std::vector<std::string> texts)
        : texts_(std::move(texts)) {}

    std::vector<NeighborHit> retrieve(const Embedding& query,
                                      std::size_t k) override {
        calls += 1;
        std::vector<NeighborHit> hits;
        for (std::size_t i = 0; i < texts_.size(); ++i) {
            NeighborHit h;
            h.ref = {0, static_cast<std::uint64_t>(i)};
            h.distance = squared_l2(query, embed(texts_[i], query.dim(), 3));
            h.text = texts_[i];
            hits.push_back(std::move(h));
        }
        std::sort(hits.begin(), hits.end());
        if (hits.size() > k) hits.resize(k);
        return hits;
    }

    int calls = 0;

private:
    std::vector<std::string> texts_;
};

class UnavailableRetriever : public Retriever {
public:
    std::vector<NeighborHit> retrieve(const Embedding&, std::size_t) override {
        calls += 1;
        throw RetrievalUnavailable("every shard failed");
    }
    int calls = 0;
};

std::vector<std::string> neighbor_texts() {
    return {
        "the model trains on retrieved neighbor text at test time",
        "the model trains on retrieved neighbour text at test time",
        "a model trained on retrieved neighbor texts at test time",
        "the model tunes on retrieved neighbor text at eval time",
        "models train on retrieved neighbor text during testing",
        "an unrelated sentence about cooking pasta for dinner",
        "completely different content: stock prices fell sharply",
    };
}

bool params_bit_equal(const ParamSet& a, const ParamSet& b) {
    bool equal = true;
    a.for_each([&](const char* name, const std::vector<double>& ta) {
        const_cast<ParamSet&>(b).for_each(
            [&](const char* nb, std::vector<double>& tb) {
                if (std::strcmp(name, nb) != 0) return;
                if (ta.size() != tb.size() ||
                    std::memcmp(ta.data(), tb.data(),
                                ta.size() * sizeof(double)) != 0)
                    equal = false;
            });
    });
    return equal;
}

}  // namespace

TEST_CASE("ttt config validation") {
    TttConfig cfg;
    CHECK_NOTHROW(cfg.validate());

    cfg.lr = 0.0;  // explicitly allowed: a zero step is a valid experiment
    CHECK_NOTHROW(cfg.validate());

    cfg.lr = -1e-4;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.lr = 2e-5;

    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.batch_size = 16;

    cfg.grad_iterations_per_neighbor = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.grad_iterations_per_neighbor = 1;

    cfg.max_length = 8;
    cfg.stride = 9;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("order_neighbors keeps, reverses or permutes deterministically") {
    std::vector<NeighborHit> hits(5);
    for (std::size_t i = 0; i < 5; ++i) {
        hits[i].ref = {0, static_cast<std::uint64_t>(i)};
        hits[i].distance = 0.1 * static_cast<double>(i);
    }
    auto lines = [](const std::vector<NeighborHit>& h) {
        std::vector<std::uint64_t> out;
        for (const auto& x : h) out.push_back(x.ref.line_number);
        return out;
    };

    auto asc = hits;
    order_neighbors(asc, NeighborOrder::ascending, 0);
    CHECK(lines(asc) == std::vector<std::uint64_t>{0, 1, 2, 3, 4});

    auto desc = hits;
    order_neighbors(desc, NeighborOrder::descending, 0);
    CHECK(lines(desc) == std::vector<std::uint64_t>{4, 3, 2, 1, 0});

    auto rand1 = hits;
    auto rand2 = hits;
    order_neighbors(rand1, NeighborOrder::random, 99);
    order_neighbors(rand2, NeighborOrder::random, 99);
    CHECK(lines(rand1) == lines(rand2));

    auto sorted_back = lines(rand1);
    std::sort(sorted_back.begin(), sorted_back.end());
    CHECK(sorted_back == std::vector<std::uint64_t>{0, 1, 2, 3, 4});
}

TEST_CASE("local retriever returns sorted hits with text attached") {
    const auto dir = std::filesystem::temp_directory_path() / "tttnn_engine_test";
    std::filesystem::create_directories(dir);
    const std::string corpus = (dir / "neighbors.jsonl").string();
    {
        std::ofstream out(corpus, std::ios::trunc);
        for (const std::string& t : neighbor_texts())
            out << "{\"text\":\"" << t << "\"}\n";
    }
    build_offset_index(corpus);
    CorpusStore store = CorpusStore::open(corpus);

    FlatIndex index(32);
    for (std::uint64_t i = 0; i < store.num_lines(); ++i)
        index.add({0, i}, embed(store.get_line(i).text, 32, 3));
    index.freeze();

    LocalRetriever retriever(index, store);
    const auto hits =
        retriever.retrieve(embed(neighbor_texts()[0], 32, 3), 3);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].distance == 0.0);
    CHECK(hits[0].text == neighbor_texts()[0]);
    CHECK(std::is_sorted(hits.begin(), hits.end()));
    for (const auto& h : hits) CHECK(!h.text.empty());
}

TEST_CASE("a zero learning rate freezes the whole curve") {
    ModelState model = init_model(small_model(1));
    FixtureRetriever retriever(neighbor_texts());
    const TttConfig cfg = small_ttt(5, 0.0);

    const EvalCurve curve = ttt_eval_instance(
        model, retriever, "the model trains on neighbor text", cfg);
    REQUIRE(!curve.skipped);
    REQUIRE(curve.metrics_at.size() == 6);
    for (const MetricsTriple& m : curve.metrics_at) {
        CHECK(m.bits_per_byte == curve.metrics_at[0].bits_per_byte);
        CHECK(m.total_nll_nats == curve.metrics_at[0].total_nll_nats);
    }
}

TEST_CASE("k zero evaluates once and never queries the retriever") {
    ModelState model = init_model(small_model(2));
    UnavailableRetriever retriever;
    const TttConfig cfg = small_ttt(0, 1e-4);

    const EvalCurve curve =
        ttt_eval_instance(model, retriever, "some test text", cfg);
    CHECK(!curve.skipped);
    CHECK(curve.metrics_at.size() == 1);
    CHECK(curve.train_loss_per_neighbor.empty());
    CHECK(curve.neighbor_distances.empty());
    CHECK(retriever.calls == 0);
}

TEST_CASE("the model is restored after every instance") {
    ModelState model = init_model(small_model(3));
    const ParamSet before = model.params;
    const std::uint64_t step_before = model.step;

    FixtureRetriever retriever(neighbor_texts());
    const TttConfig cfg = small_ttt(4, 5e-4);
    const EvalCurve curve = ttt_eval_instance(
        model, retriever, "the model trains on retrieved neighbor text", cfg);
    REQUIRE(!curve.skipped);
    REQUIRE(curve.train_loss_per_neighbor.size() == 4);

    CHECK(params_bit_equal(before, model.params));
    CHECK(model.step == step_before);
}

TEST_CASE("an instance yields identical results alone or after others") {
    const std::vector<std::string> docs = {
        "first test document about neighbor retrieval",
        "second test document about gradient updates",
        "third test document about perplexity curves",
    };
    FixtureRetriever retriever(neighbor_texts());
    const TttConfig cfg = small_ttt(3, 3e-4);

    ModelState shared = init_model(small_model(4));
    std::vector<EvalCurve> in_sequence;
    for (const std::string& doc : docs)
        in_sequence.push_back(ttt_eval_instance(shared, retriever, doc, cfg));

    ModelState fresh = init_model(small_model(4));
    const EvalCurve alone = ttt_eval_instance(fresh, retriever, docs[2], cfg);

    const EvalCurve& last = in_sequence[2];
    REQUIRE(last.metrics_at.size() == alone.metrics_at.size());
    for (std::size_t i = 0; i < alone.metrics_at.size(); ++i) {
        CHECK(last.metrics_at[i].total_nll_nats ==
              alone.metrics_at[i].total_nll_nats);
        CHECK(last.metrics_at[i].bits_per_byte ==
              alone.metrics_at[i].bits_per_byte);
    }
    CHECK(last.train_loss_per_neighbor == alone.train_loss_per_neighbor);
    CHECK(last.neighbor_distances == alone.neighbor_distances);
}

TEST_CASE("training on near-duplicate neighbors lowers the test nll") {
    int improved = 0;
    const int rounds = 10;
    for (int seed = 0; seed < rounds; ++seed) {
        ModelState model = init_model(small_model(100 + seed));
        FixtureRetriever retriever(neighbor_texts());
        const TttConfig cfg = small_ttt(5, 1e-3);
        const EvalCurve curve = ttt_eval_instance(
            model, retriever,
            "the model trains on retrieved neighbor text at test time", cfg);
        REQUIRE(!curve.skipped);
        if (curve.metrics_at.back().bits_per_byte <=
            curve.metrics_at.front().bits_per_byte)
            improved += 1;
    }
    CHECK(improved >= 9);
}

TEST_CASE("neighbors arrive in ascending distance order by default") {
    ModelState model = init_model(small_model(5));
    FixtureRetriever retriever(neighbor_texts());
    const TttConfig cfg = small_ttt(6, 1e-4);
    const EvalCurve curve = ttt_eval_instance(
        model, retriever, "the model trains on retrieved neighbor text", cfg);
    REQUIRE(curve.neighbor_distances.size() == 6);
    CHECK(std::is_sorted(curve.neighbor_distances.begin(),
                         curve.neighbor_distances.end()));
}

TEST_CASE("descending order reverses the distance curve") {
    ModelState model = init_model(small_model(5));
    FixtureRetriever retriever(neighbor_texts());
    TttConfig cfg = small_ttt(6, 1e-4);
    cfg.order = NeighborOrder::descending;
    const EvalCurve curve = ttt_eval_instance(
        model, retriever, "the model trains on retrieved neighbor text", cfg);
    REQUIRE(curve.neighbor_distances.size() == 6);
    CHECK(std::is_sorted(curve.neighbor_distances.rbegin(),
                         curve.neighbor_distances.rend()));
}

TEST_CASE("exact matches can be excluded from the neighbor set") {
    const std::string self = neighbor_texts()[0];
    ModelState model = init_model(small_model(6));
    FixtureRetriever retriever(neighbor_texts());

    TttConfig cfg = small_ttt(3, 1e-4);
    const EvalCurve with_self = ttt_eval_instance(model, retriever, self, cfg);
    REQUIRE(!with_self.skipped);
    CHECK(with_self.neighbor_distances.front() == 0.0);

    cfg.exclude_exact_match = true;
    const EvalCurve without = ttt_eval_instance(model, retriever, self, cfg);
    REQUIRE(!without.skipped);
    for (double d : without.neighbor_distances) CHECK(d > 0.0);
}

TEST_CASE("retrieval failure marks the curve skipped and restores the model") {
    ModelState model = init_model(small_model(7));
    const ParamSet before = model.params;
    UnavailableRetriever retriever;
    const TttConfig cfg = small_ttt(5, 1e-4);

    const EvalCurve curve =
        ttt_eval_instance(model, retriever, "some test text", cfg);
    CHECK(curve.skipped);
    CHECK(!curve.skip_reason.empty());
    CHECK(curve.metrics_at.empty());
    CHECK(retriever.calls == 1);
    CHECK(params_bit_equal(before, model.params));
}

TEST_CASE("empty test text is skipped as degenerate") {
    ModelState model = init_model(small_model(8));
    FixtureRetriever retriever(neighbor_texts());
    const TttConfig cfg = small_ttt(3, 1e-4);
    const EvalCurve curve = ttt_eval_instance(model, retriever, "", cfg);
    CHECK(curve.skipped);
    CHECK(!curve.skip_reason.empty());
}

TEST_CASE("run_dataset pools metrics and counts iterations") {
    const std::vector<std::string> docs = {
        "pooled run first document",
        "pooled run second document",
        "",  // degenerate, must be skipped and excluded from pooling
        "pooled run third document",
    };
    const ModelState base = init_model(small_model(9));
    FixtureRetriever retriever(neighbor_texts());
    const TttConfig cfg = small_ttt(4, 2e-4);

    const auto [curves, summary] =
        run_dataset(base, retriever, docs, cfg, "unit");
    REQUIRE(curves.size() == 4);
    CHECK(summary.dataset == "unit");
    CHECK(summary.n_instances == 3);
    CHECK(summary.n_skipped == 1);
    CHECK(curves[2].skipped);

    double nll_before = 0.0;
    std::uint64_t bytes = 0, words = 0, iterations = 0;
    for (const EvalCurve& c : curves) {
        if (c.skipped) continue;
        nll_before += c.metrics_at.front().total_nll_nats;
        bytes += c.metrics_at.front().n_bytes;
        words += c.metrics_at.front().n_words;
        iterations += c.train_loss_per_neighbor.size();
    }
    CHECK(summary.before.total_nll_nats == doctest::Approx(nll_before).epsilon(1e-12));
    CHECK(summary.before.n_bytes == bytes);
    CHECK(summary.before.n_words == words);
    CHECK(summary.total_iterations == iterations);
    CHECK(summary.bpb_ratio ==
          doctest::Approx(summary.after.bits_per_byte /
                          summary.before.bits_per_byte)
              .epsilon(1e-12));
    CHECK(summary.mean_seconds_per_iteration > 0.0);
}

TEST_CASE("run_dataset is deterministic across job counts") {
    const std::vector<std::string> docs = {
        "parallel determinism first",
        "parallel determinism second",
        "parallel determinism third",
        "parallel determinism fourth",
        "parallel determinism fifth",
    };
    const ModelState base = init_model(small_model(10));
    FixtureRetriever r1(neighbor_texts());
    FixtureRetriever r2(neighbor_texts());
    const TttConfig cfg = small_ttt(3, 2e-4);

    const auto [c1, s1] = run_dataset(base, r1, docs, cfg, "jobs", 1);
    const auto [c2, s2] = run_dataset(base, r2, docs, cfg, "jobs", 3);
    REQUIRE(c1.size() == c2.size());
    for (std::size_t i = 0; i < c1.size(); ++i) {
        CHECK(c1[i].instance_id == c2[i].instance_id);
        REQUIRE(c1[i].metrics_at.size() == c2[i].metrics_at.size());
        for (std::size_t n = 0; n < c1[i].metrics_at.size(); ++n)
            CHECK(c1[i].metrics_at[n].total_nll_nats ==
                  c2[i].metrics_at[n].total_nll_nats);
        CHECK(c1[i].train_loss_per_neighbor == c2[i].train_loss_per_neighbor);
    }
    CHECK(s1.before.bits_per_byte == s2.before.bits_per_byte);
    CHECK(s1.after.bits_per_byte == s2.after.bits_per_byte);
}

TEST_CASE("run_dataset with no documents or only skips reports SummaryEmpty") {
    const ModelState base = init_model(small_model(11));
    FixtureRetriever retriever(neighbor_texts());
    const TttConfig cfg = small_ttt(2, 1e-4);
    CHECK_THROWS_AS(run_dataset(base, retriever, {}, cfg, "none"),
                    SummaryEmpty);

    UnavailableRetriever dead;
    CHECK_THROWS_AS(run_dataset(base, dead, {"a doc"}, cfg, "dead"),
                    SummaryEmpty);
}

TEST_CASE("fewer neighbors than k shortens the curve consistently") {
    ModelState model = init_model(small_model(12));
    FixtureRetriever retriever({"only one neighbor available"});
    const TttConfig cfg = small_ttt(10, 1e-4);
    const EvalCurve curve =
        ttt_eval_instance(model, retriever, "a test document", cfg);
    REQUIRE(!curve.skipped);
    CHECK(curve.metrics_at.size() == 2);
    CHECK(curve.train_loss_per_neighbor.size() == 1);
    CHECK(curve.neighbor_distances.size() == 1);
    CHECK(curve.step_seconds.size() == 2);
}
