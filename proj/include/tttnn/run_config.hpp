#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "tttnn/tiny_lm.hpp"
#include "tttnn/ttt_engine.hpp"

namespace tttnn {

// One committed JSON file reproduces a whole experiment; command-line flags
// override individual keys on top. Unknown keys are rejected so typos fail
// loudly instead of silently running defaults.
//
// Sections and defaults:
//   embedder: {dim: 256, n: 3}
//   model:    {vocab: 257, d_model: 64, n_heads: 2, d_ff: 128, context: 256,
//              seed: 0}
//   ttt:      {k: 20, batch_size: 16, lr: 2e-5, max_length: 0 (context-1),
//              stride: 0 (max_length), order: "ascending", order_seed: 0,
//              grad_iterations_per_neighbor: 1, exclude_exact_match: false}
//   shards:   ["host:port", ...] for remote retrieval, or one local corpus
//             path served in-process
//   report:   {output_dir: "report"}
struct RunConfig {
    std::size_t embed_dim = kDefaultEmbedDim;
    std::size_t embed_ngram = kDefaultNgram;
    ModelConfig model;
    TttConfig ttt;
    std::vector<std::string> shards;
    std::string report_dir = "report";
};

// Throws ConfigError for unknown keys, wrong types, or invalid values.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);

// True for entries shaped like host:port (numeric port); false for local
// corpus paths.
bool is_remote_shard(const std::string& entry);

}  // namespace tttnn
