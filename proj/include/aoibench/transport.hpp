#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

namespace aoibench::net {

enum class TransportKind { PlainStream, SecureStream, Quic };

enum class TlsTrust { Verify, TrustGivenRoot, InsecureSkip };

std::string to_string(TransportKind k);
TransportKind transport_kind_from_string(const std::string& s);

struct TransportConfig {
    TransportKind kind = TransportKind::PlainStream;
    std::string host = "127.0.0.1";
    uint16_t port = 0;
    // nagle_enabled applies to stream kinds only (default on);
    // segmentation_offload to quic only (default off). Setting either on the
    // wrong kind is rejected by validate().
    std::optional<bool> nagle_enabled;
    std::optional<bool> segmentation_offload;
    int connect_timeout_ms = 10000;
    TlsTrust trust = TlsTrust::Verify;
    std::string ca_pem;  // root for TrustGivenRoot
    std::string server_name = "localhost";

    // Lab tuning. so_sndbuf shrinks the kernel send buffer so a rate-limited
    // path exerts backpressure quickly; coalesce_segment_bytes is the
    // segment-full threshold of the send coalescer.
    int so_sndbuf = 0;  // 0 = kernel default
    size_t coalesce_segment_bytes = 1360;

    bool effective_nagle() const { return nagle_enabled.value_or(true); }
    bool effective_gso() const { return segmentation_offload.value_or(false); }
    void validate() const;
};

struct TransportCounters {
    uint64_t writes = 0;  // transport-level write operations
    uint64_t bytes = 0;   // bytes handed to the transport
};

class TransportError : public std::runtime_error {
  public:
    explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

class ConnectionClosed : public TransportError {
  public:
    ConnectionClosed() : TransportError("connection closed") {}
};

// Ordered reliable byte stream. Full duplex: one concurrent sender plus one
// concurrent receiver; concurrent senders must be serialized externally.
class Connection {
  public:
    virtual ~Connection() = default;

    // Queues bytes for in-order delivery. One call is one logical message
    // from the aggregation counters' point of view.
    virtual void send(std::span<const uint8_t> data) = 0;

    // Blocks until at least one byte is available; returns 0 on orderly
    // end-of-stream. close() from another thread unblocks it.
    virtual size_t recv(std::span<uint8_t> buf) = 0;

    // Flushes anything pending, then orderly shutdown. Idempotent.
    virtual void close() = 0;

    virtual TransportKind kind() const = 0;
    virtual std::string local_address() const = 0;
    virtual std::string remote_address() const = 0;

    TransportCounters counters() const {
        return {writes_.load(std::memory_order_relaxed),
                bytes_.load(std::memory_order_relaxed)};
    }

  protected:
    std::atomic<uint64_t> writes_{0};
    std::atomic<uint64_t> bytes_{0};
};

std::unique_ptr<Connection> connect(const TransportConfig& cfg);

struct ListenConfig {
    TransportKind kind = TransportKind::PlainStream;
    std::string host = "127.0.0.1";
    uint16_t port = 0;  // 0 = ephemeral
    std::string cert_pem;
    std::string key_pem;
    // QUIC receiver-side flow control; caps how far a sender can run ahead.
    uint32_t quic_stream_receive_window = 65536;
};

class Listener {
  public:
    virtual ~Listener() = default;
    // Blocks for the next established connection; nullptr after close().
    virtual std::unique_ptr<Connection> accept() = 0;
    virtual void close() = 0;
    virtual uint16_t port() const = 0;
};

std::unique_ptr<Listener> listen(const ListenConfig& cfg);

}  // namespace aoibench::net
