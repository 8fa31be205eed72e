#include "tttnn/ttt_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>

#include "tttnn/errors.hpp"
#include "tttnn/retrieval_service.hpp"
#include "tttnn/rng.hpp"

namespace tttnn {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// restore() must run on every exit path so a thrown instance cannot leak
// trained weights into the caller's model.
struct RestoreGuard {
    ModelState& model;
    const Snapshot& snap;
    ~RestoreGuard() {
        try {
            restore(model, snap);
        } catch (...) {
        }
    }
};

}  // namespace

void TttConfig::validate() const {
    if (batch_size == 0) throw ConfigError("ttt: batch_size must be positive");
    if (lr < 0.0 || !std::isfinite(lr))
        throw ConfigError("ttt: lr must be finite and non-negative");
    if (grad_iterations_per_neighbor == 0)
        throw ConfigError("ttt: grad_iterations_per_neighbor must be positive");
    if (max_length != 0 && stride != 0 && stride > max_length)
        throw ConfigError("ttt: stride must not exceed max_length");
}

std::vector<NeighborHit> LocalRetriever::retrieve(const Embedding& query,
                                                  std::size_t k) {
    std::vector<NeighborHit> hits = index_.search(query, k);
    for (NeighborHit& hit : hits)
        hit.text = store_.get_line(hit.ref.line_number, hit.ref.shard_id).text;
    return hits;
}

std::vector<NeighborHit> RemoteRetriever::retrieve(const Embedding& query,
                                                   std::size_t k) {
    return query_shards(addresses_, query, k,
                        std::chrono::milliseconds(timeout_ms_))
        .hits;
}

void order_neighbors(std::vector<NeighborHit>& hits, NeighborOrder order,
                     std::uint64_t seed) {
    switch (order) {
        case NeighborOrder::ascending:
            break;
        case NeighborOrder::descending:
            std::reverse(hits.begin(), hits.end());
            break;
        case NeighborOrder::random: {
            Rng rng(seed);
            rng.shuffle(hits);
            break;
        }
    }
}

EvalCurve ttt_eval_instance(ModelState& model, Retriever& retriever,
                            std::string_view text, const TttConfig& cfg) {
    cfg.validate();
    const std::size_t max_length =
        cfg.max_length != 0 ? cfg.max_length : model.config.context - 1;
    const std::size_t stride = cfg.stride != 0 ? cfg.stride : max_length;

    EvalCurve curve;
    const Snapshot snap = snapshot(model);
    RestoreGuard guard{model, snap};

    try {
        std::vector<NeighborHit> hits;
        if (cfg.k > 0) {
            const auto t0 = Clock::now();
            const Embedding query = embed(text, cfg.embed_dim, cfg.embed_ngram);
            hits = retriever.retrieve(query, cfg.k);
            curve.timings.query_seconds = seconds_since(t0);
        }
        if (cfg.exclude_exact_match) {
            std::erase_if(hits,
                          [&text](const NeighborHit& h) { return h.text == text; });
        }
        std::erase_if(hits, [](const NeighborHit& h) { return h.text.empty(); });
        order_neighbors(hits, cfg.order, cfg.order_seed);

        const std::uint64_t test_words = count_words(text);
        const auto eval_once = [&]() {
            const auto t0 = Clock::now();
            const auto [nll, n_bytes] = sequence_nll(model, text, max_length, stride);
            const double dt = seconds_since(t0);
            return std::pair(compute_metrics(nll, n_bytes, test_words), dt);
        };

        auto [m0, eval0_seconds] = eval_once();
        curve.metrics_at.push_back(m0);
        curve.step_seconds.push_back(eval0_seconds);
        curve.timings.eval_seconds = eval0_seconds;

        double train_seconds_total = 0.0;
        for (const NeighborHit& hit : hits) {
            const auto windows = chunk(tokenize(hit.text), max_length, stride);
            if (windows.empty()) continue;
            TokenBatch batch;
            const std::size_t take = std::min(cfg.batch_size, windows.size());
            batch.sequences.reserve(take);
            for (std::size_t i = 0; i < take; ++i)
                batch.sequences.push_back(windows[i].tokens);

            const auto t_train = Clock::now();
            double loss = 0.0;
            bool applied = true;
            try {
                for (std::size_t it = 0; it < cfg.grad_iterations_per_neighbor;
                     ++it) {
                    auto [l, cache] = forward_nll(model, batch);
                    loss = l;
                    const Gradients grads = backward(model, cache);
                    adamw_step(model, grads, cfg.lr);
                }
            } catch (const NonFiniteGradError&) {
                applied = false;
                curve.notes.push_back(
                    "neighbor skipped: non-finite gradients at distance " +
                    std::to_string(hit.distance));
            }
            const double train_seconds = seconds_since(t_train);
            if (!applied) continue;

            train_seconds_total += train_seconds;
            curve.train_loss_per_neighbor.push_back(loss);
            curve.neighbor_distances.push_back(hit.distance);
            auto [m, eval_seconds] = eval_once();
            curve.metrics_at.push_back(m);
            curve.step_seconds.push_back(train_seconds + eval_seconds);
            curve.timings.eval_seconds += eval_seconds;
        }
        const std::size_t used = curve.train_loss_per_neighbor.size();
        curve.timings.per_neighbor_train_seconds =
            used > 0 ? train_seconds_total / static_cast<double>(used) : 0.0;
    } catch (const RetrievalUnavailable& e) {
        curve = EvalCurve{};
        curve.skipped = true;
        curve.skip_reason = e.what();
    } catch (const DegenerateInput& e) {
        curve = EvalCurve{};
        curve.skipped = true;
        curve.skip_reason = e.what();
    }
    return curve;
}

std::pair<std::vector<EvalCurve>, RunSummary> run_dataset(
    const ModelState& base_model, Retriever& retriever,
    const std::vector<std::string>& test_docs, const TttConfig& cfg,
    const std::string& dataset_name, int jobs) {
    if (test_docs.empty()) throw SummaryEmpty("run: no test documents");
    cfg.validate();

    std::vector<EvalCurve> curves(test_docs.size());
    const auto t_run = Clock::now();
#pragma omp parallel for schedule(dynamic) num_threads(jobs) if (jobs > 1)
    for (long long i = 0; i < static_cast<long long>(test_docs.size()); ++i) {
        const auto idx = static_cast<std::size_t>(i);
        try {
            ModelState local = base_model;
            curves[idx] = ttt_eval_instance(local, retriever, test_docs[idx], cfg);
        } catch (const std::exception& e) {
            curves[idx] = EvalCurve{};
            curves[idx].skipped = true;
            curves[idx].skip_reason = e.what();
        }
        curves[idx].instance_id = static_cast<std::uint64_t>(idx);
    }
    const double run_seconds = seconds_since(t_run);

    std::vector<ScoredRecord> before, after;
    std::uint64_t iterations = 0;
    std::uint64_t skipped = 0;
    for (const EvalCurve& c : curves) {
        if (c.skipped || c.metrics_at.empty()) {
            ++skipped;
            continue;
        }
        const MetricsTriple& b = c.metrics_at.front();
        const MetricsTriple& a = c.metrics_at.back();
        before.push_back({b.total_nll_nats, b.n_bytes, b.n_words});
        after.push_back({a.total_nll_nats, a.n_bytes, a.n_words});
        iterations += c.train_loss_per_neighbor.size();
    }
    if (before.empty())
        throw SummaryEmpty("run: every instance was skipped");

    RunSummary summary;
    summary.dataset = dataset_name;
    summary.n_instances = before.size();
    summary.n_skipped = skipped;
    summary.before = aggregate(before);
    summary.after = aggregate(after);
    summary.bpb_ratio = summary.after.bits_per_byte / summary.before.bits_per_byte;
    summary.total_iterations = iterations;
    summary.total_seconds = run_seconds;
    summary.mean_seconds_per_iteration =
        iterations > 0 ? run_seconds / static_cast<double>(iterations) : 0.0;
    return {std::move(curves), summary};
}

}  // namespace tttnn
