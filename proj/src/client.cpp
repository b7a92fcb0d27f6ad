#include "aoibench/client.hpp"

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <cstring>
#include <deque>
#include <fstream>
#include <mutex>
#include <thread>

#include "aoibench/codec.hpp"
#include "aoibench/time.hpp"

namespace aoibench::client {

namespace {

void put_u64_be(uint8_t* out, uint64_t v) {
    for (int i = 7; i >= 0; --i) {
        out[i] = static_cast<uint8_t>(v & 0xff);
        v >>= 8;
    }
}

uint64_t get_u64_be(const uint8_t* in) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = v << 8 | in[i];
    return v;
}

// Closes the connection if the deadline passes; recv() then unblocks. The
// transport has no timed receive, so timeouts are enforced from outside.
class Watchdog {
  public:
    Watchdog(net::Connection& conn, int64_t deadline_ns) : conn_(conn) {
        th_ = std::thread([this, deadline_ns] {
            std::unique_lock lk(m_);
            if (cv_.wait_until(lk, to_tp(deadline_ns), [&] { return disarmed_; }))
                return;
            fired_ = true;
            lk.unlock();
            try {
                conn_.close();
            } catch (...) {
            }
        });
    }

    ~Watchdog() {
        {
            std::lock_guard lk(m_);
            disarmed_ = true;
        }
        cv_.notify_all();
        th_.join();
    }

    bool fired() const {
        std::lock_guard lk(m_);
        return fired_;
    }

  private:
    static std::chrono::steady_clock::time_point to_tp(int64_t ns) {
        return std::chrono::steady_clock::time_point(std::chrono::nanoseconds(ns));
    }

    net::Connection& conn_;
    mutable std::mutex m_;
    std::condition_variable cv_;
    bool disarmed_ = false;
    bool fired_ = false;
    std::thread th_;
};

// Incremental packet reader over a connection.
struct PacketReader {
    net::Connection& conn;
    std::vector<uint8_t> buf;

    std::optional<codec::MqttPacket> read_packet() {
        uint8_t chunk[4096];
        for (;;) {
            if (auto d = codec::decode_packet(buf)) {
                buf.erase(buf.begin(), buf.begin() + static_cast<long>(d->consumed));
                return std::move(d->packet);
            }
            size_t n;
            try {
                n = conn.recv(chunk);
            } catch (const net::ConnectionClosed&) {
                return std::nullopt;
            }
            if (n == 0) return std::nullopt;
            buf.insert(buf.end(), chunk, chunk + n);
        }
    }
};

std::string fresh_client_id() {
    static std::atomic<uint32_t> counter{0};
    char id[24];
    std::snprintf(id, sizeof(id), "pub-%llx-%u",
                  static_cast<unsigned long long>(now_ns() & 0xffffffff),
                  counter.fetch_add(1));
    return id;
}

void mqtt_handshake(net::Connection& conn, PacketReader& reader, int timeout_ms) {
    Watchdog wd(conn, now_ns() + static_cast<int64_t>(timeout_ms) * kNsPerMs);
    conn.send(codec::encode_packet(codec::Connect{fresh_client_id(), 60, true}));
    auto pkt = reader.read_packet();
    if (wd.fired()) throw net::TransportError("connack timeout");
    if (!pkt) throw net::TransportError("connection closed before connack");
    auto* ack = std::get_if<codec::ConnAck>(&*pkt);
    if (!ack) throw net::TransportError("expected connack");
    if (ack->return_code != 0)
        throw net::TransportError("connection refused, code " +
                                  std::to_string(ack->return_code));
}

std::string outcome_name(mq::PushOutcome o) {
    switch (o) {
        case mq::PushOutcome::Stored: return "stored";
        case mq::PushOutcome::Replaced: return "replaced";
        case mq::PushOutcome::BlockedThenStored: return "blocked-then-stored";
    }
    return "?";
}

}  // namespace

uint64_t StreamConfig::total_messages() const {
    return static_cast<uint64_t>(std::ceil(nominal_rate * window_s));
}

std::vector<uint8_t> build_payload(uint64_t seq, int64_t gen_ns, size_t payload_size) {
    std::vector<uint8_t> p(payload_size, 0);
    put_u64_be(p.data(), static_cast<uint64_t>(gen_ns));
    put_u64_be(p.data() + 8, seq);
    return p;
}

bool parse_payload(std::span<const uint8_t> payload, uint64_t& seq, int64_t& gen_ns) {
    if (payload.size() < 16) return false;
    gen_ns = static_cast<int64_t>(get_u64_be(payload.data()));
    seq = get_u64_be(payload.data() + 8);
    return true;
}

RequestTiming simple_publish(const SimpleConfig& cfg) {
    cfg.transport.validate();
    if (cfg.payload_size < 16) throw std::invalid_argument("payload_size must be >= 16");
    if (cfg.qos > 1) throw std::invalid_argument("qos must be 0 or 1");

    RequestTiming t;
    int64_t t0 = now_ns();
    auto conn = net::connect(cfg.transport);
    PacketReader reader{*conn, {}};
    mqtt_handshake(*conn, reader, cfg.response_timeout_ms);
    int64_t t1 = now_ns();
    t.connect_ms = static_cast<double>(t1 - t0) / kNsPerMs;

    codec::Publish pub;
    pub.topic = cfg.topic;
    pub.qos = cfg.qos;
    if (cfg.qos == 1) pub.packet_id = 1;
    pub.payload = build_payload(0, t1, cfg.payload_size);
    conn->send(codec::encode_packet(pub));
    if (cfg.qos == 1) {
        Watchdog wd(*conn, now_ns() + static_cast<int64_t>(cfg.response_timeout_ms) * kNsPerMs);
        for (;;) {
            auto pkt = reader.read_packet();
            if (wd.fired()) throw net::TransportError("puback timeout");
            if (!pkt) throw net::TransportError("connection closed before puback");
            if (auto* pa = std::get_if<codec::PubAck>(&*pkt)) {
                if (pa->packet_id != 1) throw net::TransportError("puback id mismatch");
                break;
            }
        }
    }
    int64_t t2 = now_ns();
    t.publish_ms = static_cast<double>(t2 - t1) / kNsPerMs;

    conn->send(codec::encode_packet(codec::Disconnect{}));
    conn->close();
    t.total_ms = static_cast<double>(now_ns() - t0) / kNsPerMs;
    return t;
}

StreamResult stream_run(const StreamConfig& cfg) {
    cfg.transport.validate();
    if (cfg.payload_size < 16) throw std::invalid_argument("payload_size must be >= 16");
    if (cfg.qos > 1) throw std::invalid_argument("qos must be 0 or 1");
    if (cfg.nominal_rate <= 0 || cfg.window_s <= 0)
        throw std::invalid_argument("rate and window must be positive");

    const uint64_t total = cfg.total_messages();
    const int64_t period_ns =
        static_cast<int64_t>(std::llround(kNsPerSec / cfg.nominal_rate));

    StreamResult result;
    result.records.resize(total);
    for (uint64_t k = 0; k < total; ++k) {
        result.records[k].seq = k;
        result.records[k].packet_id = packet_id_for(k);
    }

    std::unique_ptr<net::Connection> conn;
    try {
        conn = net::connect(cfg.transport);
        PacketReader hs{*conn, {}};
        mqtt_handshake(*conn, hs, cfg.transport.connect_timeout_ms);
        if (!hs.buf.empty())
            throw net::TransportError("unexpected bytes after connack");
    } catch (const std::exception& e) {
        result.failed = true;
        result.failure = e.what();
        return result;
    }

    mq::MessageQueue<uint64_t> queue(cfg.queue.policy, cfg.queue.capacity);
    mq::MessageQueue<codec::PubAck> acks(mq::QueuePolicy::FifoUnbounded);
    auto& records = result.records;

    std::mutex fail_m;
    auto fail = [&](const std::string& why) {
        std::lock_guard lk(fail_m);
        if (!result.failed) {
            result.failed = true;
            result.failure = why;
        }
        queue.close();
        acks.close();
        try {
            conn->close();
        } catch (...) {
        }
    };

    // In-flight qos-1 sends awaiting their puback, in send order.
    std::mutex inflight_m;
    std::condition_variable inflight_cv;
    std::deque<uint64_t> inflight;
    bool sender_done = false;

    std::thread producer([&] {
        int64_t start = now_ns();
        for (uint64_t k = 0; k < total; ++k) {
            if (k > 0) precise_sleep_until_ns(start + static_cast<int64_t>(k) * period_ns);
            records[k].gen_ns = now_ns();
            try {
                records[k].enqueue_outcome = queue.push(k);
            } catch (const mq::QueueClosed&) {
                return;
            }
        }
        queue.close();
    });

    std::thread sender([&] {
        std::vector<uint8_t> batch;
        std::vector<uint64_t> batch_seqs;
        try {
            for (;;) {
                // One snapshot of the queue per iteration: a batch holds at
                // most what was buffered when the sender woke, split into
                // writes of at most sender_batch_bytes each.
                auto seqs = queue.drain();
                if (seqs.empty()) return;
                size_t i = 0;
                while (i < seqs.size()) {
                    batch.clear();
                    batch_seqs.clear();
                    while (i < seqs.size() && batch.size() < cfg.sender_batch_bytes) {
                        uint64_t k = seqs[i++];
                        codec::Publish pub;
                        pub.topic = cfg.topic;
                        pub.qos = cfg.qos;
                        if (cfg.qos == 1) pub.packet_id = packet_id_for(k);
                        pub.payload = build_payload(k, records[k].gen_ns, cfg.payload_size);
                        auto bytes = codec::encode_packet(pub);
                        batch.insert(batch.end(), bytes.begin(), bytes.end());
                        batch_seqs.push_back(k);
                    }
                    if (cfg.qos == 1) {
                        std::lock_guard lk(inflight_m);
                        for (uint64_t s : batch_seqs) inflight.push_back(s);
                    }
                    // Stamp before handing over: the ack for this batch can
                    // be processed before send() returns.
                    int64_t sent_at = now_ns();
                    for (uint64_t s : batch_seqs) records[s].send_ns = sent_at;
                    conn->send(batch);
                }
            }
        } catch (const std::exception& e) {
            fail(std::string("sender: ") + e.what());
        }
    });

    std::thread receiver;
    std::thread ack_manager;
    if (cfg.qos == 1) {
        receiver = std::thread([&] {
            std::vector<uint8_t> buf;
            uint8_t chunk[4096];
            try {
                for (;;) {
                    size_t n = conn->recv(chunk);
                    if (n == 0) break;
                    buf.insert(buf.end(), chunk, chunk + n);
                    while (auto d = codec::decode_packet(buf)) {
                        buf.erase(buf.begin(), buf.begin() + static_cast<long>(d->consumed));
                        if (auto* pa = std::get_if<codec::PubAck>(&d->packet))
                            acks.push(*pa);
                    }
                }
            } catch (const net::ConnectionClosed&) {
            } catch (const mq::QueueClosed&) {
            } catch (const std::exception& e) {
                fail(std::string("receiver: ") + e.what());
            }
            acks.close();
        });

        ack_manager = std::thread([&] {
            for (;;) {
                auto pa = acks.pop();
                if (!pa) return;
                std::unique_lock lk(inflight_m);
                if (inflight.empty() || packet_id_for(inflight.front()) != pa->packet_id) {
                    lk.unlock();
                    fail("puback did not match in-flight head");
                    return;
                }
                uint64_t s = inflight.front();
                inflight.pop_front();
                records[s].ack_ns = now_ns();
                lk.unlock();
                inflight_cv.notify_all();
            }
        });
    }

    producer.join();
    sender.join();
    {
        std::lock_guard lk(inflight_m);
        sender_done = true;
    }
    inflight_cv.notify_all();

    if (cfg.qos == 1) {
        std::unique_lock lk(inflight_m);
        bool drained = inflight_cv.wait_for(
            lk, std::chrono::milliseconds(cfg.ack_timeout_ms),
            [&] { return inflight.empty() || result.failed; });
        lk.unlock();
        if (!drained) fail("timed out waiting for publish acks");
    }

    if (!result.failed) {
        try {
            conn->send(codec::encode_packet(codec::Disconnect{}));
        } catch (...) {
        }
    }
    try {
        conn->close();
    } catch (...) {
    }
    acks.close();
    if (receiver.joinable()) receiver.join();
    if (ack_manager.joinable()) ack_manager.join();
    (void)sender_done;

    result.queue = queue.counters();
    result.transport = conn->counters();
    return result;
}

void write_publish_csv(const std::vector<PublishRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "seq,gen_ns,send_ns,ack_ns,outcome\n";
    for (const auto& r : records) {
        out << r.seq << ',' << r.gen_ns << ',';
        if (r.send_ns) out << *r.send_ns;
        out << ',';
        if (r.ack_ns) out << *r.ack_ns;
        out << ',' << outcome_name(r.enqueue_outcome) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace aoibench::client
