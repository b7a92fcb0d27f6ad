#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "aoibench/transport.hpp"

namespace aoibench::broker {

// Minimal relay: Connect/ConnAck, Subscribe/SubAck + registration, Publish
// forwarded by exact topic (qos 0 downstream), PubAck for qos 1 upstream.
class Broker {
  public:
    virtual ~Broker() = default;
    virtual uint16_t port(net::TransportKind kind) const = 0;
    virtual void stop() = 0;
};

std::unique_ptr<Broker> serve(std::vector<net::ListenConfig> listen_cfgs);

}  // namespace aoibench::broker
