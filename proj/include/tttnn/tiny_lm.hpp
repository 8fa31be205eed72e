#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tttnn {

// Byte-level autoregressive LM: token + position embeddings, one pre-norm
// causal self-attention block (RMSNorm gains, Q/K/V/O), a pre-norm two-layer
// ReLU MLP, a final RMSNorm and a linear head. All math is f64 and every
// accumulation order is fixed, so losses are bit-identical across runs and
// hosts for the same seed and inputs.

inline constexpr std::uint32_t kBosToken = 256;
inline constexpr std::size_t kByteVocab = 257;  // bytes 0..255 + BOS

struct ModelConfig {
    std::size_t vocab = kByteVocab;  // shrinkable for micro test models
    std::size_t d_model = 64;
    std::size_t n_heads = 2;         // must divide d_model
    std::size_t d_ff = 128;
    std::size_t context = 256;       // T, maximum sequence length
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError
    bool same_shape(const ModelConfig& other) const;
};

// Every trainable tensor, row-major, in the fixed serialization order of
// for_each below.
struct ParamSet {
    std::vector<double> tok_emb;     // vocab x d_model
    std::vector<double> pos_emb;     // context x d_model
    std::vector<double> att_gain;    // d_model
    std::vector<double> wq, wk, wv, wo;  // d_model x d_model, out = in * W
    std::vector<double> mlp_gain;    // d_model
    std::vector<double> w1;          // d_model x d_ff
    std::vector<double> w2;          // d_ff x d_model
    std::vector<double> final_gain;  // d_model
    std::vector<double> w_out;       // d_model x vocab

    void resize_zeroed(const ModelConfig& cfg);

    template <class F>
    void for_each(F&& f) {
        f("tok_emb", tok_emb);
        f("pos_emb", pos_emb);
        f("att_gain", att_gain);
        f("wq", wq);
        f("wk", wk);
        f("wv", wv);
        f("wo", wo);
        f("mlp_gain", mlp_gain);
        f("w1", w1);
        f("w2", w2);
        f("final_gain", final_gain);
        f("w_out", w_out);
    }

    template <class F>
    void for_each(F&& f) const {
        const_cast<ParamSet*>(this)->for_each(
            [&f](const char* name, std::vector<double>& t) {
                f(name, static_cast<const std::vector<double>&>(t));
            });
    }
};

using Gradients = ParamSet;

struct ModelState {
    ModelConfig config;
    ParamSet params;
    ParamSet m, v;  // AdamW first/second moments
    std::uint64_t step = 0;
    // Bumped on every mutation; forward caches pin it so a stale cache is
    // rejected by backward.
    std::uint64_t version = 0;
};

struct Snapshot {
    ModelConfig config;
    ParamSet params, m, v;
    std::uint64_t step = 0;
};

struct TokenBatch {
    std::vector<std::vector<std::uint32_t>> sequences;
};

// One evaluation window: the model input (leading BOS) plus how many of its
// final predicted positions count toward a sequence-level score.
struct Window {
    std::vector<std::uint32_t> tokens;
    std::size_t n_scored = 0;
};

// Opaque activations captured by forward_nll for the matching backward.
struct ForwardCache;

ModelState init_model(const ModelConfig& cfg);

// [BOS] followed by the UTF-8 bytes of text.
std::vector<std::uint32_t> tokenize(std::string_view text);

// Windows of at most max_length tokens starting at multiples of stride,
// covering the input. Windows after the first get a BOS prefix; n_scored
// marks the final positions not already scored by an earlier window, so the
// scored sets partition the input's non-BOS tokens for any stride <=
// max_length. Requires 1 <= stride <= max_length.
std::vector<Window> chunk(const std::vector<std::uint32_t>& tokens,
                          std::size_t max_length, std::size_t stride);

// Mean cross-entropy in nats over all predicted positions (every token
// except each sequence's leading BOS). Throws TokenRangeError for ids >=
// vocab and EmptyTargetError when no position is scored.
std::pair<double, ForwardCache> forward_nll(const ModelState& state,
                                            const TokenBatch& batch);

// Analytic gradients of forward_nll. Throws CacheError if the state mutated
// since the forward pass.
Gradients backward(const ModelState& state, const ForwardCache& cache);

// Bias-corrected AdamW (beta1 0.9, beta2 0.999, eps 1e-8, weight decay 0).
// Refuses non-finite gradients without touching the state.
void adamw_step(ModelState& state, const Gradients& grads, double lr);

Snapshot snapshot(const ModelState& state);
// Byte-exact restore of parameters, moments and step counter. Throws
// SnapshotError when the snapshot's shape does not match the state's.
void restore(ModelState& state, const Snapshot& snap);

// Sliding-window NLL of a text: tokenize, chunk(max_length, stride), sum the
// newly scored positions of each window. Returns (total nats, scored token
// count); the count equals the text's byte length. Requires max_length + 1
// <= context so re-prefixed windows still fit.
std::pair<double, std::size_t> sequence_nll(const ModelState& state,
                                            std::string_view text,
                                            std::size_t max_length,
                                            std::size_t stride);

// Checkpoint: magic "TTTNNLM0", seven u64 fields (vocab, d_model, n_heads,
// d_ff, context, seed, step), then params, m, v as packed f64 in for_each
// order, all little-endian.
void save_checkpoint(const ModelState& state, const std::string& path);
ModelState load_checkpoint(const std::string& path);

// --- forward internals shared with the cache ---

struct SeqActivations {
    std::vector<std::uint32_t> ids;
    std::size_t len = 0;
    std::vector<double> x;       // L x d   embeddings sum
    std::vector<double> rms1;    // L
    std::vector<double> a;       // L x d   normed attention input
    std::vector<double> q, k, v; // L x d
    std::vector<double> probs_att;  // n_heads x L x L softmax rows
    std::vector<double> att;     // L x d   attention mix
    std::vector<double> x2;      // L x d   after attention residual
    std::vector<double> rms2;    // L
    std::vector<double> b;       // L x d   normed MLP input
    std::vector<double> h1;      // L x d_ff pre-activation
    std::vector<double> r;       // L x d_ff relu
    std::vector<double> x3;      // L x d   after MLP residual
    std::vector<double> rms3;    // L
    std::vector<double> f;       // L x d   final norm
    std::vector<double> probs;   // L x vocab softmax of logits
    std::vector<double> pos_nll; // L-1 per-position nll, position t predicts t+1
};

struct ForwardCache {
    std::vector<SeqActivations> seqs;
    std::size_t n_scored = 0;
    std::uint64_t state_version = 0;
};

// Single-sequence forward pass; building block of forward_nll and
// sequence_nll.
SeqActivations forward_sequence(const ModelState& state,
                                std::span<const std::uint32_t> ids);

}  // namespace tttnn
