#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aoibench/queue.hpp"
#include "aoibench/transport.hpp"

namespace aoibench::client {

struct PublishRecord {
    uint64_t seq = 0;
    int64_t gen_ns = 0;
    mq::PushOutcome enqueue_outcome = mq::PushOutcome::Stored;
    std::optional<int64_t> send_ns;
    std::optional<int64_t> ack_ns;
    uint16_t packet_id = 0;
};

struct QueueChoice {
    mq::QueuePolicy policy = mq::QueuePolicy::FifoBounded;
    size_t capacity = 16;
};

struct StreamConfig {
    net::TransportConfig transport;
    std::string topic = "aoi";
    uint8_t qos = 1;
    size_t payload_size = 128;  // >= 16
    double nominal_rate = 1.0;  // messages/second
    double window_s = 1.0;      // seconds
    QueueChoice queue;
    int ack_timeout_ms = 30000;      // qos 1 drain deadline after last send
    size_t sender_batch_bytes = 8192;  // max bytes drained per transport write

    // ceil(nominal_rate * window)
    uint64_t total_messages() const;
};

struct StreamResult {
    std::vector<PublishRecord> records;
    mq::QueueCounters queue;
    net::TransportCounters transport;
    bool failed = false;
    std::string failure;
};

struct RequestTiming {
    double connect_ms = 0;
    double publish_ms = 0;
    double total_ms = 0;
};

struct SimpleConfig {
    net::TransportConfig transport;
    std::string topic = "aoi";
    uint8_t qos = 0;
    size_t payload_size = 128;
    int response_timeout_ms = 10000;
};

// ((seq mod 65535) + 1): MQTT ids are 16-bit and runs can exceed 65535
// messages; ack matching follows in-flight FIFO order so wraparound stays
// unambiguous under in-order delivery.
inline uint16_t packet_id_for(uint64_t seq) {
    return static_cast<uint16_t>(seq % 65535 + 1);
}

// Payload layout (bit-exact): bytes 0-7 gen_ns big-endian, bytes 8-15 seq
// big-endian, zero padding to payload_size. The subscriber recovers
// gen_ns/seq without a side channel.
std::vector<uint8_t> build_payload(uint64_t seq, int64_t gen_ns, size_t payload_size);
bool parse_payload(std::span<const uint8_t> payload, uint64_t& seq, int64_t& gen_ns);

// connect -> connack -> publish (-> puback iff qos 1) -> disconnect on a
// fresh connection; wall-clock phase durations are the energy proxy.
RequestTiming simple_publish(const SimpleConfig& cfg);

// Pipelined publisher: producer, sender, ack receiver, ack manager.
StreamResult stream_run(const StreamConfig& cfg);

// Publisher log CSV: seq,gen_ns,send_ns,ack_ns,outcome
void write_publish_csv(const std::vector<PublishRecord>& records, const std::string& path);

}  // namespace aoibench::client
