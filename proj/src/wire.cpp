#include "tttnn/wire.hpp"

#include "tttnn/errors.hpp"

namespace tttnn::wire {

std::string encode_frame(const nlohmann::json& msg) {
    std::string payload = msg.dump();
    if (payload.size() > kMaxFrameBytes) {
        throw FrameTooLarge("payload of " + std::to_string(payload.size()) +
                            " bytes exceeds the " + std::to_string(kMaxFrameBytes) +
                            " byte cap");
    }
    std::string frame;
    frame.reserve(4 + payload.size());
    auto len = static_cast<std::uint32_t>(payload.size());
    frame.push_back(static_cast<char>((len >> 24) & 0xff));
    frame.push_back(static_cast<char>((len >> 16) & 0xff));
    frame.push_back(static_cast<char>((len >> 8) & 0xff));
    frame.push_back(static_cast<char>(len & 0xff));
    frame += payload;
    return frame;
}

nlohmann::json decode_frame(std::string_view bytes) {
    if (bytes.size() < 4) {
        throw FrameTruncated("frame header incomplete");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    std::uint32_t len = (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
                        (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
    if (len > kMaxFrameBytes) {
        throw FrameTooLarge("frame announces " + std::to_string(len) + " bytes");
    }
    if (bytes.size() < 4 + static_cast<std::size_t>(len)) {
        throw FrameTruncated("frame payload incomplete");
    }
    return nlohmann::json::parse(bytes.substr(4, len));
}

nlohmann::json make_health_request() {
    return nlohmann::json{{"type", "health"}};
}

nlohmann::json make_query_request(const Embedding& q, std::size_t k) {
    return nlohmann::json{{"type", "query"}, {"vector", q.values}, {"k", k}};
}

nlohmann::json make_hits_response(std::uint16_t shard_id, double query_seconds,
                                  const std::vector<NeighborHit>& hits) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& h : hits) {
        arr.push_back({{"shard", h.ref.shard_id},
                       {"line", h.ref.line_number},
                       {"distance", h.distance},
                       {"text", h.text}});
    }
    return nlohmann::json{{"type", "hits"},
                          {"shard", shard_id},
                          {"query_seconds", query_seconds},
                          {"hits", std::move(arr)}};
}

nlohmann::json make_error_response(const std::string& message) {
    return nlohmann::json{{"type", "error"}, {"message", message}};
}

std::vector<NeighborHit> parse_hits_response(const nlohmann::json& msg,
                                             double* query_seconds) {
    if (msg.value("type", "") != "hits") {
        throw std::runtime_error("expected hits response, got: " + msg.dump());
    }
    try {
        if (query_seconds != nullptr) {
            *query_seconds = msg.at("query_seconds").get<double>();
        }
        std::vector<NeighborHit> hits;
        for (const auto& h : msg.at("hits")) {
            NeighborHit hit;
            hit.ref.shard_id = h.at("shard").get<std::uint16_t>();
            hit.ref.line_number = h.at("line").get<std::uint64_t>();
            hit.distance = h.at("distance").get<double>();
            hit.text = h.at("text").get<std::string>();
            hits.push_back(std::move(hit));
        }
        return hits;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("malformed hits response: ") + e.what());
    }
}

}  // namespace tttnn::wire
