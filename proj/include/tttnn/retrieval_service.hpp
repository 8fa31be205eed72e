#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "tttnn/corpus_store.hpp"
#include "tttnn/net.hpp"
#include "tttnn/vector_index.hpp"
#include "tttnn/wire.hpp"

namespace tttnn {

// Protocol cap on requested neighbors per query.
inline constexpr std::size_t kMaxQueryK = 1024;

struct ShardServerConfig {
    std::string corpus_path;
    std::string offset_index_path;  // defaults to <corpus_path>.idx
    std::string vector_index_path;  // defaults to <corpus_path>.vec
    std::string listen_host = "127.0.0.1";
    std::uint16_t listen_port = 0;  // 0 picks an ephemeral port
    std::uint16_t shard_id = 0;
};

// Serves one shard's vector index and corpus over the framed JSON protocol.
// Index and store are immutable after startup; each connection gets its own
// handler thread, so a long query never blocks health checks on another
// connection. Per-connection failures are answered (or dropped) without
// taking the server down.
class ShardServer {
public:
    explicit ShardServer(ShardServerConfig config);
    ~ShardServer();

    // Binds and starts accepting. Throws on bind failure (e.g. port in use).
    void start();
    void stop();

    std::uint16_t port() const { return port_; }
    std::string address() const;
    std::uint16_t shard_id() const { return config_.shard_id; }
    std::uint64_t num_lines() const { return store_.num_lines(); }
    std::size_t dim() const { return index_.dim(); }

    std::uint64_t queries_served() const { return queries_served_.load(); }
    std::uint64_t protocol_errors() const { return protocol_errors_.load(); }

private:
    void accept_loop();
    void handle_connection(net::Socket conn);
    nlohmann::json handle_message(const nlohmann::json& msg);

    ShardServerConfig config_;
    CorpusStore store_;
    FlatIndex index_;

    net::Socket listener_;
    std::uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;

    std::mutex conn_mu_;
    std::vector<std::thread> conn_threads_;
    std::vector<int> conn_fds_;

    std::atomic<std::uint64_t> queries_served_{0};
    std::atomic<std::uint64_t> protocol_errors_{0};
};

// One request-response exchange with a shard. Throws on transport failure;
// returns whatever message the server sent (including error responses).
nlohmann::json shard_request(const std::string& address, const nlohmann::json& msg,
                             std::chrono::milliseconds timeout);

struct FanoutResult {
    std::vector<NeighborHit> hits;       // global top-k, NeighborHit order
    std::size_t shards_ok = 0;
    std::size_t shards_failed = 0;
    double server_query_seconds = 0.0;   // slowest shard's server-side time
    double client_seconds = 0.0;         // end-to-end fan-out wall time
};

// Queries every shard concurrently and merges the responses into the global
// top-k. Shards that fail or time out contribute nothing; if all of them
// fail, throws RetrievalUnavailable.
FanoutResult query_shards(const std::vector<std::string>& addresses,
                          const Embedding& q, std::size_t k,
                          std::chrono::milliseconds timeout);

}  // namespace tttnn
