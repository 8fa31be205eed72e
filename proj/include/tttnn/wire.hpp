#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "tttnn/vector_index.hpp"

namespace tttnn::wire {

// Frame layout: 4-byte big-endian payload length, then that many bytes of
// UTF-8 JSON. Payloads above the cap are refused on both directions.
inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

// Serializes msg into a complete frame. Throws FrameTooLarge.
std::string encode_frame(const nlohmann::json& msg);

// Decodes one complete frame. Throws FrameTruncated when bytes do not hold
// a full frame and FrameTooLarge when the header announces an oversize
// payload. Malformed JSON payloads throw nlohmann::json::parse_error.
nlohmann::json decode_frame(std::string_view bytes);

// Protocol messages.
nlohmann::json make_health_request();
nlohmann::json make_query_request(const Embedding& q, std::size_t k);
nlohmann::json make_hits_response(std::uint16_t shard_id, double query_seconds,
                                  const std::vector<NeighborHit>& hits);
nlohmann::json make_error_response(const std::string& message);

// Parses a {"type":"hits",...} message back into hits. Throws
// std::runtime_error on shape violations.
std::vector<NeighborHit> parse_hits_response(const nlohmann::json& msg,
                                             double* query_seconds = nullptr);

}  // namespace tttnn::wire
