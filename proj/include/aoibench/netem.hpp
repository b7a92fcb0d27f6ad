#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace aoibench::netem {

enum class ProxyMode { Stream, Datagram };

// Userspace stand-in for broker-side tc: per-direction fixed delay and
// token-bucket rate limiting between client and upstream.
struct ImpairmentConfig {
    int64_t one_way_delay_ms = 0;           // applied to each direction
    std::optional<int64_t> rate_limit_bps;  // bits/second, each direction
    int64_t burst_bytes = 1500;             // one MTU-equivalent of tokens
    std::string listen_host = "127.0.0.1";
    uint16_t listen_port = 0;  // 0 = ephemeral
    std::string upstream_host = "127.0.0.1";
    uint16_t upstream_port = 0;
    ProxyMode mode = ProxyMode::Stream;

    // Per-direction staging bound (stream mode). A full stage stops reading
    // from the source socket, which is what propagates backpressure through
    // the rate limit to the sender.
    size_t stage_limit_bytes = 65536;
    int64_t idle_eviction_ms = 60000;  // datagram peer tracking
};

struct ProxyStats {
    uint64_t relayed_bytes_up = 0;    // client -> upstream
    uint64_t relayed_bytes_down = 0;  // upstream -> client
    uint64_t datagrams_up = 0;
    uint64_t datagrams_down = 0;
    size_t max_datagram_bytes = 0;
};

class Proxy {
  public:
    virtual ~Proxy() = default;
    virtual uint16_t port() const = 0;
    virtual ProxyStats stats() const = 0;
    virtual void stop() = 0;
};

std::unique_ptr<Proxy> run_proxy(const ImpairmentConfig& cfg);

}  // namespace aoibench::netem
