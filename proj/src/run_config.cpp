#include "tttnn/run_config.hpp"

#include <cctype>
#include <fstream>
#include <initializer_list>

#include "tttnn/errors.hpp"

namespace tttnn {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

void check_keys(const json& obj, const char* section,
                std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                known = true;
                break;
            }
        }
        if (!known)
            fail("config: unknown key \"" + it.key() + "\" in " + section);
    }
}

const json& section(const json& doc, const char* name) {
    const json& s = doc.at(name);
    if (!s.is_object())
        fail(std::string("config: section \"") + name + "\" must be an object");
    return s;
}

std::uint64_t get_u64(const json& obj, const char* section_name,
                      const char* key, std::uint64_t dflt) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_number_unsigned())
        fail(std::string("config: ") + section_name + "." + key +
             " must be an unsigned integer");
    return v.get<std::uint64_t>();
}

double get_f64(const json& obj, const char* section_name, const char* key,
               double dflt) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_number())
        fail(std::string("config: ") + section_name + "." + key +
             " must be a number");
    return v.get<double>();
}

bool get_bool(const json& obj, const char* section_name, const char* key,
              bool dflt) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_boolean())
        fail(std::string("config: ") + section_name + "." + key +
             " must be a boolean");
    return v.get<bool>();
}

std::string get_str(const json& obj, const char* section_name, const char* key,
                    std::string dflt) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_string())
        fail(std::string("config: ") + section_name + "." + key +
             " must be a string");
    return v.get<std::string>();
}

NeighborOrder parse_order(const std::string& s) {
    if (s == "ascending") return NeighborOrder::ascending;
    if (s == "descending") return NeighborOrder::descending;
    if (s == "random") return NeighborOrder::random;
    fail("config: ttt.order must be ascending, descending or random, got \"" +
         s + "\"");
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& doc) {
    if (!doc.is_object()) fail("config: top level must be a JSON object");
    check_keys(doc, "top level", {"embedder", "model", "ttt", "shards", "report"});

    RunConfig cfg;
    if (doc.contains("embedder")) {
        const json& e = section(doc, "embedder");
        check_keys(e, "embedder", {"dim", "n"});
        cfg.embed_dim = get_u64(e, "embedder", "dim", cfg.embed_dim);
        cfg.embed_ngram = get_u64(e, "embedder", "n", cfg.embed_ngram);
    }
    if (cfg.embed_dim < 2) fail("config: embedder.dim must be at least 2");
    if (cfg.embed_ngram < 1) fail("config: embedder.n must be at least 1");

    if (doc.contains("model")) {
        const json& m = section(doc, "model");
        check_keys(m, "model",
                   {"vocab", "d_model", "n_heads", "d_ff", "context", "seed"});
        cfg.model.vocab = get_u64(m, "model", "vocab", cfg.model.vocab);
        cfg.model.d_model = get_u64(m, "model", "d_model", cfg.model.d_model);
        cfg.model.n_heads = get_u64(m, "model", "n_heads", cfg.model.n_heads);
        cfg.model.d_ff = get_u64(m, "model", "d_ff", cfg.model.d_ff);
        cfg.model.context = get_u64(m, "model", "context", cfg.model.context);
        cfg.model.seed = get_u64(m, "model", "seed", cfg.model.seed);
    }
    cfg.model.validate();

    if (doc.contains("ttt")) {
        const json& t = section(doc, "ttt");
        check_keys(t, "ttt",
                   {"k", "batch_size", "lr", "max_length", "stride", "order",
                    "order_seed", "grad_iterations_per_neighbor",
                    "exclude_exact_match"});
        cfg.ttt.k = get_u64(t, "ttt", "k", cfg.ttt.k);
        cfg.ttt.batch_size = get_u64(t, "ttt", "batch_size", cfg.ttt.batch_size);
        cfg.ttt.lr = get_f64(t, "ttt", "lr", cfg.ttt.lr);
        cfg.ttt.max_length = get_u64(t, "ttt", "max_length", cfg.ttt.max_length);
        cfg.ttt.stride = get_u64(t, "ttt", "stride", cfg.ttt.stride);
        cfg.ttt.order = parse_order(get_str(t, "ttt", "order", "ascending"));
        cfg.ttt.order_seed = get_u64(t, "ttt", "order_seed", cfg.ttt.order_seed);
        cfg.ttt.grad_iterations_per_neighbor =
            get_u64(t, "ttt", "grad_iterations_per_neighbor",
                    cfg.ttt.grad_iterations_per_neighbor);
        cfg.ttt.exclude_exact_match =
            get_bool(t, "ttt", "exclude_exact_match", cfg.ttt.exclude_exact_match);
    }
    cfg.ttt.embed_dim = cfg.embed_dim;
    cfg.ttt.embed_ngram = cfg.embed_ngram;
    cfg.ttt.validate();

    if (doc.contains("shards")) {
        const json& s = doc.at("shards");
        if (!s.is_array()) fail("config: shards must be an array of strings");
        for (const json& entry : s) {
            if (!entry.is_string())
                fail("config: shards must be an array of strings");
            cfg.shards.push_back(entry.get<std::string>());
        }
    }

    if (doc.contains("report")) {
        const json& r = section(doc, "report");
        check_keys(r, "report", {"output_dir"});
        cfg.report_dir = get_str(r, "report", "output_dir", cfg.report_dir);
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("config: cannot open " + path);
    const json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) fail("config: invalid JSON in " + path);
    return parse_run_config(doc);
}

bool is_remote_shard(const std::string& entry) {
    const std::size_t colon = entry.rfind(':');
    if (colon == std::string::npos || colon + 1 >= entry.size()) return false;
    for (std::size_t i = colon + 1; i < entry.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(entry[i]))) return false;
    }
    return true;
}

}  // namespace tttnn
