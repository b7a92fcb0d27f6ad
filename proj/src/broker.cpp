#include "aoibench/broker.hpp"

#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <thread>

#include "aoibench/codec.hpp"

namespace aoibench::broker {

namespace {

using codec::MqttPacket;

// A subscriber with its own outbound FIFO and writer thread, so one slow
// subscriber cannot stall the publisher path or its siblings.
class Subscriber {
  public:
    explicit Subscriber(std::shared_ptr<net::Connection> conn) : conn_(std::move(conn)) {
        writer_ = std::thread([this] { writer_loop(); });
    }

    ~Subscriber() {
        shutdown();
        if (writer_.joinable()) writer_.join();
    }

    void enqueue(std::vector<uint8_t> bytes) {
        std::lock_guard lk(m_);
        if (dead_) return;
        out_.push_back(std::move(bytes));
        cv_.notify_one();
    }

    void shutdown() {
        {
            std::lock_guard lk(m_);
            dead_ = true;
            cv_.notify_all();
        }
        conn_->close();
    }

    bool dead() const {
        std::lock_guard lk(m_);
        return dead_;
    }

  private:
    void writer_loop() {
        for (;;) {
            std::vector<uint8_t> bytes;
            {
                std::unique_lock lk(m_);
                cv_.wait(lk, [&] { return dead_ || !out_.empty(); });
                if (dead_ && out_.empty()) return;
                bytes = std::move(out_.front());
                out_.pop_front();
            }
            try {
                conn_->send(bytes);
            } catch (...) {
                std::lock_guard lk(m_);
                dead_ = true;
                return;
            }
        }
    }

    std::shared_ptr<net::Connection> conn_;
    mutable std::mutex m_;
    std::condition_variable cv_;
    std::deque<std::vector<uint8_t>> out_;
    bool dead_ = false;
    std::thread writer_;
};

class BrokerImpl final : public Broker {
  public:
    explicit BrokerImpl(std::vector<net::ListenConfig> cfgs) {
        for (auto& cfg : cfgs) {
            auto listener = net::listen(cfg);
            ports_[cfg.kind] = listener->port();
            listeners_.push_back(std::move(listener));
        }
        for (auto& l : listeners_) {
            accept_threads_.emplace_back([this, lp = l.get()] { accept_loop(lp); });
        }
    }

    ~BrokerImpl() override { stop(); }

    uint16_t port(net::TransportKind kind) const override {
        auto it = ports_.find(kind);
        if (it == ports_.end()) throw net::TransportError("broker has no such listener");
        return it->second;
    }

    void stop() override {
        bool expected = false;
        if (!stop_.compare_exchange_strong(expected, true)) return;
        for (auto& l : listeners_) l->close();
        for (auto& t : accept_threads_)
            if (t.joinable()) t.join();
        {
            std::lock_guard lk(m_);
            for (auto& [topic, subs] : registry_)
                for (auto& s : subs) s->shutdown();
            for (auto& c : live_conns_) c->close();
        }
        {
            std::lock_guard lk(handlers_m_);
            for (auto& t : handlers_)
                if (t.joinable()) t.join();
        }
        std::lock_guard lk(m_);
        registry_.clear();
    }

  private:
    void accept_loop(net::Listener* listener) {
        while (!stop_.load()) {
            std::unique_ptr<net::Connection> conn;
            try {
                conn = listener->accept();
            } catch (...) {
                continue;
            }
            if (!conn) return;
            std::shared_ptr<net::Connection> shared(std::move(conn));
            {
                std::lock_guard lk(m_);
                live_conns_.push_back(shared);
            }
            std::lock_guard lk(handlers_m_);
            handlers_.emplace_back([this, shared] { handle(shared); });
        }
    }

    void handle(std::shared_ptr<net::Connection> conn) {
        std::vector<uint8_t> buf;
        std::vector<uint8_t> chunk(16 * 1024);
        bool connected = false;
        std::shared_ptr<Subscriber> self_sub;

        auto cleanup = [&] {
            if (self_sub) deregister(self_sub);
            conn->close();
        };

        try {
            for (;;) {
                size_t n = conn->recv(chunk);
                if (n == 0) break;
                buf.insert(buf.end(), chunk.begin(), chunk.begin() + n);

                // Replies for everything decodable from this chunk go out in
                // one write; acks batch naturally under load.
                std::vector<uint8_t> replies;
                size_t off = 0;
                for (;;) {
                    auto decoded = codec::decode_packet(
                        std::span<const uint8_t>(buf).subspan(off));
                    if (!decoded) break;
                    off += decoded->consumed;
                    if (!connected) {
                        if (!std::holds_alternative<codec::Connect>(decoded->packet))
                            throw codec::CodecError("first packet must be connect");
                        connected = true;
                        auto ack = codec::encode_packet(codec::ConnAck{0});
                        replies.insert(replies.end(), ack.begin(), ack.end());
                        continue;
                    }
                    if (auto* pub = std::get_if<codec::Publish>(&decoded->packet)) {
                        if (pub->qos == 1) {
                            auto ack = codec::encode_packet(codec::PubAck{*pub->packet_id});
                            replies.insert(replies.end(), ack.begin(), ack.end());
                        }
                        forward(*pub);
                    } else if (auto* sub = std::get_if<codec::Subscribe>(&decoded->packet)) {
                        // Flush the SubAck before registration: once the
                        // subscriber's writer thread exists it owns the
                        // send side of this connection.
                        if (!replies.empty()) {
                            conn->send(replies);
                            replies.clear();
                        }
                        conn->send(codec::encode_packet(
                            codec::SubAck{sub->packet_id, sub->requested_qos}));
                        if (!self_sub) {
                            self_sub = std::make_shared<Subscriber>(conn);
                            register_sub(sub->topic_filter, self_sub);
                        }
                    } else if (std::holds_alternative<codec::Disconnect>(decoded->packet)) {
                        if (!replies.empty()) conn->send(replies);
                        cleanup();
                        return;
                    }
                    // ConnAck/PubAck/SubAck from a client are ignored.
                }
                buf.erase(buf.begin(), buf.begin() + off);
                if (!replies.empty()) conn->send(replies);
            }
        } catch (...) {
            // malformed traffic or connection loss: drop the connection
        }
        cleanup();
    }

    void register_sub(const std::string& topic, std::shared_ptr<Subscriber> sub) {
        std::lock_guard lk(m_);
        registry_[topic].push_back(std::move(sub));
    }

    void deregister(const std::shared_ptr<Subscriber>& sub) {
        std::lock_guard lk(m_);
        for (auto& [topic, subs] : registry_)
            std::erase(subs, sub);
    }

    void forward(const codec::Publish& pub) {
        // Downstream delivery is always qos 0; AoI is computed at reception
        // and the broker-subscriber segment is unimpaired.
        codec::Publish out;
        out.topic = pub.topic;
        out.qos = 0;
        out.payload = pub.payload;
        auto bytes = codec::encode_packet(out);

        std::lock_guard lk(m_);
        auto it = registry_.find(pub.topic);
        if (it == registry_.end()) return;
        std::erase_if(it->second, [](const auto& s) { return s->dead(); });
        for (auto& s : it->second) s->enqueue(bytes);
    }

    std::vector<std::unique_ptr<net::Listener>> listeners_;
    std::map<net::TransportKind, uint16_t> ports_;
    std::vector<std::thread> accept_threads_;
    std::atomic<bool> stop_{false};
    std::mutex m_;
    std::map<std::string, std::vector<std::shared_ptr<Subscriber>>> registry_;
    std::vector<std::shared_ptr<net::Connection>> live_conns_;
    std::mutex handlers_m_;
    std::vector<std::thread> handlers_;
};

}  // namespace

std::unique_ptr<Broker> serve(std::vector<net::ListenConfig> listen_cfgs) {
    return std::make_unique<BrokerImpl>(std::move(listen_cfgs));
}

}  // namespace aoibench::broker
