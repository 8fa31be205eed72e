#include "tttnn/retrieval_service.hpp"

#include <sys/socket.h>

#include <algorithm>
#include <cstdio>

#include "tttnn/errors.hpp"

namespace tttnn {

namespace {

// Idle connections are reaped after this long without a complete frame.
constexpr std::chrono::hours kConnectionIdleLimit{1};

std::string default_path(const std::string& given, const std::string& corpus,
                         const char* suffix) {
    return given.empty() ? corpus + suffix : given;
}

}  // namespace

ShardServer::ShardServer(ShardServerConfig config)
    : config_(std::move(config)),
      store_(CorpusStore::open(
          config_.corpus_path,
          default_path(config_.offset_index_path, config_.corpus_path, ".idx"))),
      index_(FlatIndex::load(
          default_path(config_.vector_index_path, config_.corpus_path, ".vec"))) {}

ShardServer::~ShardServer() { stop(); }

void ShardServer::start() {
    listener_ = net::listen_tcp(config_.listen_host, config_.listen_port);
    port_ = net::local_port(listener_);
    running_.store(true);
    accept_thread_ = std::thread([this] { accept_loop(); });
}

std::string ShardServer::address() const {
    return config_.listen_host + ":" + std::to_string(port_);
}

void ShardServer::stop() {
    if (!running_.exchange(false)) {
        return;
    }
    listener_.shutdown_both();
    if (accept_thread_.joinable()) {
        accept_thread_.join();
    }
    // No new connections past this point; wake the existing handlers.
    std::vector<std::thread> workers;
    {
        std::lock_guard<std::mutex> lock(conn_mu_);
        for (int fd : conn_fds_) {
            ::shutdown(fd, SHUT_RDWR);
        }
        workers.swap(conn_threads_);
    }
    for (auto& t : workers) {
        if (t.joinable()) t.join();
    }
    listener_.close();
}

void ShardServer::accept_loop() {
    while (running_.load()) {
        net::Socket conn = accept_conn(listener_, std::chrono::milliseconds(100));
        if (!conn.valid()) {
            continue;
        }
        std::lock_guard<std::mutex> lock(conn_mu_);
        conn_fds_.push_back(conn.fd());
        conn_threads_.emplace_back(
            [this, c = std::move(conn)]() mutable { handle_connection(std::move(c)); });
    }
}

void ShardServer::handle_connection(net::Socket conn) {
    const int fd = conn.fd();
    while (running_.load()) {
        char header[4];
        std::size_t got;
        try {
            got = net::recv_exact(fd, header, 4, net::after(kConnectionIdleLimit));
        } catch (const std::exception&) {
            break;
        }
        if (got == 0) {
            break;  // clean close
        }
        if (got < 4) {
            protocol_errors_.fetch_add(1);  // truncated mid-header
            break;
        }
        const auto* p = reinterpret_cast<const unsigned char*>(header);
        std::uint32_t len = (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
                            (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);

        try {
            if (len > wire::kMaxFrameBytes) {
                protocol_errors_.fetch_add(1);
                net::send_all(fd,
                              wire::encode_frame(wire::make_error_response(
                                  "frame too large: " + std::to_string(len) + " bytes")),
                              net::after(std::chrono::seconds(10)));
                break;  // cannot resync past an unread oversize payload
            }

            std::string payload(len, '\0');
            got = net::recv_exact(fd, payload.data(), len, net::after(kConnectionIdleLimit));
            if (got < len) {
                protocol_errors_.fetch_add(1);  // truncated mid-payload
                break;
            }

            nlohmann::json response;
            nlohmann::json msg = nlohmann::json::parse(payload, nullptr, false);
            if (msg.is_discarded()) {
                protocol_errors_.fetch_add(1);
                response = wire::make_error_response("malformed frame: payload is not JSON");
            } else {
                response = handle_message(msg);
            }
            net::send_all(fd, wire::encode_frame(response),
                          net::after(std::chrono::seconds(30)));
        } catch (const std::exception&) {
            break;  // connection-level failure; server stays up
        }
    }
    std::lock_guard<std::mutex> lock(conn_mu_);
    std::erase(conn_fds_, fd);
}

nlohmann::json ShardServer::handle_message(const nlohmann::json& msg) {
    std::string type = msg.is_object() ? msg.value("type", "") : "";
    if (type == "health") {
        return nlohmann::json{
            {"type", "ok"}, {"lines", store_.num_lines()}, {"dim", index_.dim()}};
    }
    if (type != "query") {
        protocol_errors_.fetch_add(1);
        return wire::make_error_response("unknown message type: \"" + type + "\"");
    }

    if (!msg.contains("vector") || !msg["vector"].is_array() || !msg.contains("k") ||
        !msg["k"].is_number_unsigned()) {
        protocol_errors_.fetch_add(1);
        return wire::make_error_response("query needs \"vector\" (array) and \"k\" (unsigned)");
    }
    std::size_t k = msg["k"].get<std::size_t>();
    if (k > kMaxQueryK) {
        protocol_errors_.fetch_add(1);
        return wire::make_error_response("k " + std::to_string(k) + " exceeds protocol cap " +
                                         std::to_string(kMaxQueryK));
    }
    Embedding q;
    q.values = msg["vector"].get<std::vector<double>>();
    if (q.dim() != index_.dim()) {
        protocol_errors_.fetch_add(1);
        return wire::make_error_response("vector length " + std::to_string(q.dim()) +
                                         " != shard dim " + std::to_string(index_.dim()));
    }

    auto started = std::chrono::steady_clock::now();
    std::vector<NeighborHit> hits;
    try {
        hits = index_.search(q, k);
        for (auto& hit : hits) {
            hit.text = store_.get_line(hit.ref.line_number).text;
            hit.ref.shard_id = config_.shard_id;
        }
    } catch (const std::exception& e) {
        protocol_errors_.fetch_add(1);
        return wire::make_error_response(std::string("query failed: ") + e.what());
    }
    double query_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    queries_served_.fetch_add(1);
    return wire::make_hits_response(config_.shard_id, query_seconds, hits);
}

nlohmann::json shard_request(const std::string& address, const nlohmann::json& msg,
                             std::chrono::milliseconds timeout) {
    auto [host, port] = net::split_host_port(address);
    net::Deadline deadline = net::after(timeout);
    net::Socket conn = net::connect_tcp(host, port, deadline);

    net::send_all(conn.fd(), wire::encode_frame(msg), deadline);

    char header[4];
    if (net::recv_exact(conn.fd(), header, 4, deadline) < 4) {
        throw FrameTruncated("response header incomplete from " + address);
    }
    const auto* p = reinterpret_cast<const unsigned char*>(header);
    std::uint32_t len = (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
                        (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
    if (len > wire::kMaxFrameBytes) {
        throw FrameTooLarge("response announces " + std::to_string(len) + " bytes");
    }
    std::string payload(len, '\0');
    if (net::recv_exact(conn.fd(), payload.data(), len, deadline) < len) {
        throw FrameTruncated("response payload incomplete from " + address);
    }
    return nlohmann::json::parse(payload);
}

FanoutResult query_shards(const std::vector<std::string>& addresses, const Embedding& q,
                          std::size_t k, std::chrono::milliseconds timeout) {
    if (addresses.empty()) {
        throw RetrievalUnavailable("no shard addresses configured");
    }

    auto started = std::chrono::steady_clock::now();
    nlohmann::json request = wire::make_query_request(q, k);

    std::vector<std::vector<NeighborHit>> per_shard(addresses.size());
    std::vector<double> per_shard_seconds(addresses.size(), 0.0);
    std::vector<char> failed(addresses.size(), 0);

    std::vector<std::thread> workers;
    workers.reserve(addresses.size());
    for (std::size_t i = 0; i < addresses.size(); ++i) {
        workers.emplace_back([&, i] {
            try {
                nlohmann::json response = shard_request(addresses[i], request, timeout);
                per_shard[i] =
                    wire::parse_hits_response(response, &per_shard_seconds[i]);
            } catch (const std::exception& e) {
                failed[i] = 1;
                std::fprintf(stderr, "[query_shards] shard %s failed: %s\n",
                             addresses[i].c_str(), e.what());
            }
        });
    }
    for (auto& w : workers) {
        w.join();
    }

    FanoutResult result;
    for (std::size_t i = 0; i < addresses.size(); ++i) {
        if (failed[i]) {
            ++result.shards_failed;
            continue;
        }
        ++result.shards_ok;
        result.server_query_seconds =
            std::max(result.server_query_seconds, per_shard_seconds[i]);
        result.hits.insert(result.hits.end(), per_shard[i].begin(), per_shard[i].end());
    }
    if (result.shards_ok == 0) {
        throw RetrievalUnavailable("all " + std::to_string(addresses.size()) +
                                   " shards failed");
    }
    std::sort(result.hits.begin(), result.hits.end());
    if (result.hits.size() > k) {
        result.hits.resize(k);
    }
    result.client_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

}  // namespace tttnn
