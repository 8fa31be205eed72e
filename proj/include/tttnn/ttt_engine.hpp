#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tttnn/corpus_store.hpp"
#include "tttnn/embedder.hpp"
#include "tttnn/metrics.hpp"
#include "tttnn/tiny_lm.hpp"
#include "tttnn/vector_index.hpp"

namespace tttnn {

// Test-time training loop: per test sequence, retrieve k nearest neighbors,
// apply one gradient update per neighbor in distance order, measure the
// metric curve after every update, then restore the model.

class Retriever {
public:
    virtual ~Retriever() = default;
    // Hits sorted ascending by (distance, shard, line), text filled in.
    virtual std::vector<NeighborHit> retrieve(const Embedding& query,
                                              std::size_t k) = 0;
};

// In-process retrieval over a flat index plus the corpus it was built from.
class LocalRetriever : public Retriever {
public:
    LocalRetriever(const FlatIndex& index, CorpusStore& store)
        : index_(index), store_(store) {}
    std::vector<NeighborHit> retrieve(const Embedding& query,
                                      std::size_t k) override;

private:
    const FlatIndex& index_;
    CorpusStore& store_;
};

// Scatter-gather retrieval across shard servers speaking the framed
// protocol.
class RemoteRetriever : public Retriever {
public:
    explicit RemoteRetriever(std::vector<std::string> addresses,
                             int timeout_ms = 30000)
        : addresses_(std::move(addresses)), timeout_ms_(timeout_ms) {}
    std::vector<NeighborHit> retrieve(const Embedding& query,
                                      std::size_t k) override;

private:
    std::vector<std::string> addresses_;
    int timeout_ms_;
};

enum class NeighborOrder { ascending, descending, random };

struct TttConfig {
    std::size_t k = 20;
    std::size_t batch_size = 16;
    double lr = 2e-5;
    // 0 means "model context - 1"; stride 0 follows max_length. At full
    // scale these would be 1024/1024.
    std::size_t max_length = 0;
    std::size_t stride = 0;
    NeighborOrder order = NeighborOrder::ascending;
    std::uint64_t order_seed = 0;
    std::size_t grad_iterations_per_neighbor = 1;
    bool exclude_exact_match = false;
    std::size_t embed_dim = kDefaultEmbedDim;
    std::size_t embed_ngram = kDefaultNgram;

    void validate() const;  // throws ConfigError
};

struct EvalTimings {
    double query_seconds = 0.0;
    double per_neighbor_train_seconds = 0.0;  // mean over neighbors used
    double eval_seconds = 0.0;                // total across the k'+1 evals
};

struct EvalCurve {
    std::uint64_t instance_id = 0;
    // Entry n is the test-text metrics after n neighbor updates; exactly
    // k'+1 entries where k' counts the neighbors actually used.
    std::vector<MetricsTriple> metrics_at;
    std::vector<double> train_loss_per_neighbor;  // k' entries
    std::vector<double> neighbor_distances;       // k' entries, curve order
    // Wall seconds per curve point: eval alone at n=0, train+eval after.
    std::vector<double> step_seconds;
    EvalTimings timings;
    bool skipped = false;
    std::string skip_reason;
    std::vector<std::string> notes;
};

struct RunSummary {
    std::string dataset;
    std::uint64_t n_instances = 0;  // instances that produced a curve
    std::uint64_t n_skipped = 0;
    MetricsTriple before;  // pooled n=0
    MetricsTriple after;   // pooled n=k'
    double bpb_ratio = 1.0;
    std::uint64_t total_iterations = 0;  // neighbor updates across the run
    double total_seconds = 0.0;
    double mean_seconds_per_iteration = 0.0;
};

// In place: ascending keeps the retriever's order, descending reverses it,
// random applies a seeded shuffle.
void order_neighbors(std::vector<NeighborHit>& hits, NeighborOrder order,
                     std::uint64_t seed);

// Runs the full per-instance loop and restores the model to its entry state
// in every path, including errors. RetrievalUnavailable and degenerate test
// text mark the curve skipped; a NonFiniteGradError skips that neighbor and
// annotates the curve.
EvalCurve ttt_eval_instance(ModelState& model, Retriever& retriever,
                            std::string_view text, const TttConfig& cfg);

// Evaluates every document against a private copy of base_model (instances
// are independent, so jobs > 1 distributes them across threads without
// changing any result). Pools n=0 and n=k' metrics across curves. Throws
// SummaryEmpty when every instance was skipped.
std::pair<std::vector<EvalCurve>, RunSummary> run_dataset(
    const ModelState& base_model, Retriever& retriever,
    const std::vector<std::string>& test_docs, const TttConfig& cfg,
    const std::string& dataset_name, int jobs = 1);

}  // namespace tttnn
