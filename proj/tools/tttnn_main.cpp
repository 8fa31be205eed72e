#include <chrono>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "tttnn/corpus_gen.hpp"
#include "tttnn/corpus_store.hpp"
#include "tttnn/embedder.hpp"
#include "tttnn/errors.hpp"
#include "tttnn/report.hpp"
#include "tttnn/retrieval_service.hpp"
#include "tttnn/rng.hpp"
#include "tttnn/run_config.hpp"
#include "tttnn/tiny_lm.hpp"
#include "tttnn/ttt_engine.hpp"
#include "tttnn/vector_index.hpp"

namespace {

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

std::string idx_path_for(const std::string& corpus) { return corpus + ".idx"; }
std::string vec_path_for(const std::string& corpus) { return corpus + ".vec"; }

void ensure_offset_index(const std::string& corpus) {
    if (!std::filesystem::exists(idx_path_for(corpus)))
        tttnn::build_offset_index(corpus);
}

// Embeds every line of the store and writes the flat vector index.
void build_vec_index(const tttnn::CorpusStore& store, const std::string& vec_path,
                     std::size_t dim, std::size_t ngram, std::uint16_t shard_id) {
    const std::uint64_t n = store.num_lines();
    std::vector<std::string> texts(n);
    for (std::uint64_t i = 0; i < n; ++i)
        texts[i] = store.get_line(i).text;

    std::vector<tttnn::Embedding> embs(n);
#pragma omp parallel for schedule(dynamic, 64)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        embs[static_cast<std::size_t>(i)] =
            tttnn::embed(texts[static_cast<std::size_t>(i)], dim, ngram);

    tttnn::FlatIndex index(dim);
    for (std::uint64_t i = 0; i < n; ++i)
        index.add({shard_id, i}, embs[i]);
    index.freeze();
    index.save(vec_path);
}

// ---- build-index ----

struct BuildIndexOpts {
    std::string corpus;
    std::uint64_t dim = tttnn::kDefaultEmbedDim;
    std::uint64_t ngram = tttnn::kDefaultNgram;
    std::uint16_t shard_id = 0;
};

int run_build_index(const BuildIndexOpts& o) {
    const tttnn::OffsetIndex offsets = tttnn::build_offset_index(o.corpus);
    std::cout << "indexed " << offsets.count() << " lines -> "
              << idx_path_for(o.corpus) << "\n";
    const tttnn::CorpusStore store = tttnn::CorpusStore::open(o.corpus);
    build_vec_index(store, vec_path_for(o.corpus), o.dim, o.ngram, o.shard_id);
    std::cout << "embedded " << store.num_lines() << " docs at dim " << o.dim
              << " -> " << vec_path_for(o.corpus) << "\n";
    return 0;
}

// ---- serve ----

struct ServeOpts {
    std::string corpus;
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
    std::uint16_t shard_id = 0;
};

int run_serve(const ServeOpts& o) {
    ensure_offset_index(o.corpus);
    if (!std::filesystem::exists(vec_path_for(o.corpus))) {
        std::cerr << "error: vector index missing: " << vec_path_for(o.corpus)
                  << " (run build-index first)\n";
        return 2;
    }
    tttnn::ShardServerConfig cfg;
    cfg.corpus_path = o.corpus;
    cfg.listen_host = o.host;
    cfg.listen_port = o.port;
    cfg.shard_id = o.shard_id;
    tttnn::ShardServer server(cfg);
    server.start();
    std::cout << "listening on " << server.address() << " shard="
              << server.shard_id() << " lines=" << server.num_lines()
              << " dim=" << server.dim() << std::endl;

    std::signal(SIGTERM, on_signal);
    std::signal(SIGINT, on_signal);
    while (!g_stop)
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
    std::cout << "shutdown clean" << std::endl;
    return 0;
}

// ---- pretrain ----

struct PretrainOpts {
    std::string corpus;
    std::string out;
    std::uint64_t steps = 200;
    std::uint64_t seed = 0;
    double lr = 1e-3;
    std::uint64_t batch = 16;
    std::uint64_t vocab = tttnn::kByteVocab;
    std::uint64_t d_model = 64;
    std::uint64_t n_heads = 2;
    std::uint64_t d_ff = 128;
    std::uint64_t context = 256;
};

int run_pretrain(const PretrainOpts& o) {
    ensure_offset_index(o.corpus);
    const tttnn::CorpusStore store = tttnn::CorpusStore::open(o.corpus);
    if (store.num_lines() == 0) {
        std::cerr << "error: training corpus is empty\n";
        return 2;
    }

    tttnn::ModelConfig mc;
    mc.vocab = o.vocab;
    mc.d_model = o.d_model;
    mc.n_heads = o.n_heads;
    mc.d_ff = o.d_ff;
    mc.context = o.context;
    mc.seed = o.seed;
    tttnn::ModelState model = tttnn::init_model(mc);

    tttnn::Rng rng(o.seed);
    const std::size_t max_len = mc.context - 1;
    const std::uint64_t print_every = std::max<std::uint64_t>(1, o.steps / 10);
    for (std::uint64_t step = 1; step <= o.steps; ++step) {
        tttnn::TokenBatch batch;
        std::uint64_t attempts = 0;
        while (batch.sequences.size() < o.batch) {
            if (++attempts > 20 * o.batch) {
                std::cerr << "error: corpus has no usable text\n";
                return 2;
            }
            const std::uint64_t line = rng.next_below(store.num_lines());
            const std::string text = store.get_line(line).text;
            if (text.empty()) continue;
            const auto windows =
                tttnn::chunk(tttnn::tokenize(text), max_len, max_len);
            batch.sequences.push_back(windows.front().tokens);
        }
        const auto [loss, cache] = tttnn::forward_nll(model, batch);
        const tttnn::Gradients grads = tttnn::backward(model, cache);
        tttnn::adamw_step(model, grads, o.lr);
        if (step % print_every == 0 || step == o.steps)
            std::cout << "step " << step << "/" << o.steps << " loss " << loss
                      << "\n";
    }
    tttnn::save_checkpoint(model, o.out);
    std::cout << "saved checkpoint -> " << o.out << "\n";
    return 0;
}

// ---- ttt-eval ----

struct TttEvalOpts {
    std::string test_corpus;
    std::string config_path;
    std::string checkpoint;
    std::string neighbors;  // local corpus path
    std::vector<std::string> shards;
    std::string dataset = "test";
    std::string out_dir;
    std::uint64_t limit = 0;
    int jobs = 1;
    std::uint64_t k = 0;
    double lr = 0.0;
    std::string order;
};

int run_ttt_eval(const CLI::App* sub, const TttEvalOpts& o) {
    tttnn::RunConfig cfg;
    if (!o.config_path.empty()) cfg = tttnn::load_run_config(o.config_path);
    if (sub->count("--k") > 0) cfg.ttt.k = o.k;
    if (sub->count("--lr") > 0) cfg.ttt.lr = o.lr;
    if (sub->count("--order") > 0) {
        if (o.order == "ascending")
            cfg.ttt.order = tttnn::NeighborOrder::ascending;
        else if (o.order == "descending")
            cfg.ttt.order = tttnn::NeighborOrder::descending;
        else if (o.order == "random")
            cfg.ttt.order = tttnn::NeighborOrder::random;
        else {
            std::cerr << "error: --order must be ascending, descending or random\n";
            return 2;
        }
    }
    const std::string out_dir = !o.out_dir.empty() ? o.out_dir : cfg.report_dir;

    tttnn::ModelState model = o.checkpoint.empty()
                                  ? tttnn::init_model(cfg.model)
                                  : tttnn::load_checkpoint(o.checkpoint);

    ensure_offset_index(o.test_corpus);
    const tttnn::CorpusStore test_store = tttnn::CorpusStore::open(o.test_corpus);
    std::uint64_t n_docs = test_store.num_lines();
    if (o.limit > 0 && o.limit < n_docs) n_docs = o.limit;
    if (n_docs == 0) {
        std::cerr << "error: test corpus is empty\n";
        return 2;
    }
    std::vector<std::string> docs(n_docs);
    for (std::uint64_t i = 0; i < n_docs; ++i)
        docs[i] = test_store.get_line(i).text;

    // Retrieval source: explicit flags win over the config's shard list.
    std::vector<std::string> sources = o.shards;
    if (sources.empty() && !o.neighbors.empty()) sources = {o.neighbors};
    if (sources.empty()) sources = cfg.shards;
    if (sources.empty()) {
        std::cerr << "error: no retrieval source (use --neighbors, --shard or "
                     "config shards)\n";
        return 2;
    }
    bool all_remote = true;
    for (const std::string& s : sources)
        all_remote = all_remote && tttnn::is_remote_shard(s);

    std::optional<tttnn::CorpusStore> local_store;
    std::optional<tttnn::FlatIndex> local_index;
    std::unique_ptr<tttnn::Retriever> retriever;
    if (all_remote) {
        retriever = std::make_unique<tttnn::RemoteRetriever>(sources);
    } else if (sources.size() == 1) {
        const std::string& corpus = sources.front();
        ensure_offset_index(corpus);
        local_store.emplace(tttnn::CorpusStore::open(corpus));
        if (!std::filesystem::exists(vec_path_for(corpus))) {
            std::cout << "building vector index for " << corpus << "\n";
            build_vec_index(*local_store, vec_path_for(corpus), cfg.embed_dim,
                            cfg.embed_ngram, 0);
        }
        local_index.emplace(tttnn::FlatIndex::load(vec_path_for(corpus)));
        if (local_index->dim() != cfg.embed_dim) {
            std::cerr << "error: vector index dim " << local_index->dim()
                      << " does not match embedder dim " << cfg.embed_dim
                      << "\n";
            return 2;
        }
        retriever =
            std::make_unique<tttnn::LocalRetriever>(*local_index, *local_store);
    } else {
        std::cerr << "error: shards must be all remote addresses or one local "
                     "corpus path\n";
        return 2;
    }

    auto [curves, summary] =
        tttnn::run_dataset(model, *retriever, docs, cfg.ttt, o.dataset, o.jobs);

    std::filesystem::create_directories(out_dir);
    const auto rows = tttnn::rows_from_curves(curves);
    tttnn::write_curve_rows_csv(rows, out_dir + "/curves.csv");
    tttnn::write_summary_json(summary, out_dir + "/summary.json");
    tttnn::write_report_files(rows, out_dir);

    std::cout << "dataset " << summary.dataset << ": " << summary.n_instances
              << " instances (" << summary.n_skipped << " skipped)\n"
              << "bits per byte " << summary.before.bits_per_byte << " -> "
              << summary.after.bits_per_byte << " (ratio " << summary.bpb_ratio
              << ")\n"
              << "iterations " << summary.total_iterations << ", "
              << summary.mean_seconds_per_iteration << " s/iteration\n"
              << "report written to " << out_dir << "\n";
    return summary.n_skipped > 0 ? 1 : 0;
}

// ---- report ----

struct ReportOpts {
    std::string csv;
    std::string out = "report";
};

int run_report(const ReportOpts& o) {
    const auto rows = tttnn::read_curve_rows_csv(o.csv);
    tttnn::write_report_files(rows, o.out);
    const tttnn::TimingTable t = tttnn::timing_from_rows(rows);
    std::cout << "iterations " << t.iterations << ", total "
              << t.total_seconds << " s, " << t.seconds_per_iteration
              << " s/iteration\n"
              << "report written to " << o.out << "\n";
    return 0;
}

// ---- gen-corpus ----

struct GenCorpusOpts {
    std::string out;
    std::string manifest;
    std::vector<std::string> domains;
    double dup_rate = 0.0;
    std::uint64_t seed = 0;
};

tttnn::DomainSpec parse_domain(const std::string& s) {
    tttnn::DomainSpec d;
    const std::size_t c1 = s.find(':');
    if (c1 == std::string::npos)
        throw tttnn::ConfigError("domain must be name:count[:family_size]: " + s);
    d.name = s.substr(0, c1);
    const std::size_t c2 = s.find(':', c1 + 1);
    try {
        if (c2 == std::string::npos) {
            d.n_docs = std::stoull(s.substr(c1 + 1));
        } else {
            d.n_docs = std::stoull(s.substr(c1 + 1, c2 - c1 - 1));
            d.family_size = std::stoull(s.substr(c2 + 1));
        }
    } catch (const std::exception&) {
        throw tttnn::ConfigError("domain must be name:count[:family_size]: " + s);
    }
    return d;
}

int run_gen_corpus(const GenCorpusOpts& o) {
    tttnn::CorpusGenSpec spec;
    for (const std::string& s : o.domains) spec.domains.push_back(parse_domain(s));
    spec.dup_rate = o.dup_rate;
    spec.seed = o.seed;
    const auto docs = tttnn::generate_corpus(spec);
    const std::string manifest =
        o.manifest.empty() ? o.out + ".manifest.jsonl" : o.manifest;
    tttnn::write_corpus_files(docs, o.out, manifest);
    std::cout << "wrote " << docs.size() << " docs -> " << o.out << "\n"
              << "manifest -> " << manifest << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sharded nearest-neighbor retrieval with per-instance "
                 "test-time training"};
    app.require_subcommand(1);

    BuildIndexOpts build_opts;
    CLI::App* build = app.add_subcommand(
        "build-index", "Build the offset and vector indexes for a JSONL corpus");
    build->add_option("corpus", build_opts.corpus, "JSONL corpus path")
        ->required();
    build->add_option("--dim", build_opts.dim, "embedding dimension");
    build->add_option("--ngram", build_opts.ngram, "byte n-gram size");
    build->add_option("--shard-id", build_opts.shard_id, "shard id stamped on entries");

    ServeOpts serve_opts;
    CLI::App* serve = app.add_subcommand("serve", "Serve one shard over TCP");
    serve->add_option("corpus", serve_opts.corpus, "JSONL corpus path")->required();
    serve->add_option("--host", serve_opts.host, "listen host");
    serve->add_option("--port", serve_opts.port, "listen port (0 = ephemeral)");
    serve->add_option("--shard-id", serve_opts.shard_id, "shard id");

    PretrainOpts pre_opts;
    CLI::App* pretrain = app.add_subcommand(
        "pretrain", "Train a base model on a corpus and write a checkpoint");
    pretrain->add_option("corpus", pre_opts.corpus, "JSONL corpus path")->required();
    pretrain->add_option("--out", pre_opts.out, "checkpoint output path")->required();
    pretrain->add_option("--steps", pre_opts.steps, "optimizer steps");
    pretrain->add_option("--seed", pre_opts.seed, "init and sampling seed");
    pretrain->add_option("--lr", pre_opts.lr, "learning rate");
    pretrain->add_option("--batch", pre_opts.batch, "sequences per step");
    pretrain->add_option("--vocab", pre_opts.vocab, "vocabulary size");
    pretrain->add_option("--d-model", pre_opts.d_model, "model width");
    pretrain->add_option("--n-heads", pre_opts.n_heads, "attention heads");
    pretrain->add_option("--d-ff", pre_opts.d_ff, "feed-forward width");
    pretrain->add_option("--context", pre_opts.context, "max sequence length");

    TttEvalOpts eval_opts;
    CLI::App* eval = app.add_subcommand(
        "ttt-eval", "Evaluate with test-time training over retrieved neighbors");
    eval->add_option("test_corpus", eval_opts.test_corpus, "JSONL test corpus")
        ->required();
    eval->add_option("--config", eval_opts.config_path, "run config JSON");
    eval->add_option("--checkpoint", eval_opts.checkpoint, "model checkpoint");
    eval->add_option("--neighbors", eval_opts.neighbors,
                     "local corpus to retrieve neighbors from");
    eval->add_option("--shard", eval_opts.shards,
                     "shard server host:port (repeatable)");
    eval->add_option("--dataset", eval_opts.dataset, "dataset name for the summary");
    eval->add_option("--out", eval_opts.out_dir, "report output directory");
    eval->add_option("--limit", eval_opts.limit, "evaluate only the first N docs");
    eval->add_option("--jobs", eval_opts.jobs, "parallel instances");
    eval->add_option("--k", eval_opts.k, "neighbors per instance");
    eval->add_option("--lr", eval_opts.lr, "test-time learning rate");
    eval->add_option("--order", eval_opts.order,
                     "neighbor order: ascending|descending|random");

    ReportOpts report_opts;
    CLI::App* report = app.add_subcommand(
        "report", "Regenerate charts and the timing table from a curves CSV");
    report->add_option("csv", report_opts.csv, "curves CSV path")->required();
    report->add_option("--out", report_opts.out, "report output directory");

    GenCorpusOpts gen_opts;
    CLI::App* gen = app.add_subcommand(
        "gen-corpus", "Generate a synthetic multi-domain JSONL corpus");
    gen->add_option("--out", gen_opts.out, "corpus output path")->required();
    gen->add_option("--manifest", gen_opts.manifest,
                    "manifest output path (default <out>.manifest.jsonl)");
    gen->add_option("--domain", gen_opts.domains,
                    "domain spec name:count[:family_size] (repeatable)")
        ->required();
    gen->add_option("--dup-rate", gen_opts.dup_rate,
                    "fraction of docs replaced by exact duplicates");
    gen->add_option("--seed", gen_opts.seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*build) return run_build_index(build_opts);
        if (*serve) return run_serve(serve_opts);
        if (*pretrain) return run_pretrain(pre_opts);
        if (*eval) return run_ttt_eval(eval, eval_opts);
        if (*report) return run_report(report_opts);
        if (*gen) return run_gen_corpus(gen_opts);
    } catch (const tttnn::ParseError& e) {
        std::cerr << "error: " << e.what();
        if (e.line_number > 0) std::cerr << " (line " << e.line_number << ")";
        std::cerr << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
