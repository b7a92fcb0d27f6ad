#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace aoibench::codec {

// MQTT 3.1.1 subset: connect/connack/publish/puback/subscribe/suback/disconnect.
// QoS 0 and 1 only.

struct Connect {
    std::string client_id;
    uint16_t keep_alive = 0;
    bool clean_session = true;
    bool operator==(const Connect&) const = default;
};

struct ConnAck {
    uint8_t return_code = 0;  // 0..5
    bool operator==(const ConnAck&) const = default;
};

struct Publish {
    std::string topic;
    std::optional<uint16_t> packet_id;  // present iff qos == 1
    uint8_t qos = 0;
    std::vector<uint8_t> payload;
    bool operator==(const Publish&) const = default;
};

struct PubAck {
    uint16_t packet_id = 0;
    bool operator==(const PubAck&) const = default;
};

struct Subscribe {
    uint16_t packet_id = 0;
    std::string topic_filter;
    uint8_t requested_qos = 0;
    bool operator==(const Subscribe&) const = default;
};

struct SubAck {
    uint16_t packet_id = 0;
    uint8_t return_code = 0;  // 0,1 granted qos; 0x80 failure
    bool operator==(const SubAck&) const = default;
};

struct Disconnect {
    bool operator==(const Disconnect&) const = default;
};

using MqttPacket =
    std::variant<Connect, ConnAck, Publish, PubAck, Subscribe, SubAck, Disconnect>;

class CodecError : public std::runtime_error {
  public:
    explicit CodecError(const std::string& what) : std::runtime_error(what) {}
};

// Maximum value encodable in the 4-byte remaining-length varint.
constexpr uint32_t kMaxRemainingLength = 268'435'455;

// 7-bits-per-byte varint with continuation high bit, 1..4 bytes.
std::vector<uint8_t> encode_remaining_length(uint32_t n);

std::vector<uint8_t> encode_packet(const MqttPacket& p);

struct Decoded {
    MqttPacket packet;
    size_t consumed = 0;
};

// Returns nullopt when more bytes are needed (truncation is not an error);
// throws CodecError on malformed input. Trailing bytes are left untouched.
std::optional<Decoded> decode_packet(std::span<const uint8_t> bytes);

}  // namespace aoibench::codec
