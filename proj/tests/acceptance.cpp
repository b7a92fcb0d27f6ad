// Acceptance checks, one per numbered criterion. Run "acceptance <n>" for a
// single criterion or no argument for all; each prints one PASS/FAIL line.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

#include "aoibench/aoi.hpp"
#include "aoibench/broker.hpp"
#include "aoibench/certs.hpp"
#include "aoibench/client.hpp"
#include "aoibench/codec.hpp"
#include "aoibench/harness.hpp"
#include "aoibench/netem.hpp"
#include "aoibench/pareto.hpp"
#include "aoibench/time.hpp"
#include "aoibench/transport.hpp"

using namespace aoibench;

namespace {

constexpr int64_t S = 1'000'000'000;

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& what) {
    if (!cond) throw Failure(what);
}

void require_ok(const harness::ExperimentResult& res, const std::string& what) {
    if (!res.failed) return;
    std::string detail;
    for (const auto& r : res.repetitions)
        if (r.failed) detail = r.failure;
    throw Failure(what + " (" + detail + ")");
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), f, a, b, c);
    return buf;
}

double median_of(std::vector<double> v) { return pareto::percentile(std::move(v), 50); }

// ---- experiment plumbing shared by the end-to-end criteria ----

harness::ExperimentConfig base_cfg(net::TransportKind kind, double rate, double window) {
    harness::ExperimentConfig cfg;
    cfg.stream.transport.kind = kind;
    cfg.stream.qos = 1;
    cfg.stream.payload_size = 32;
    cfg.stream.nominal_rate = rate;
    cfg.stream.window_s = window;
    cfg.stream.queue = {mq::QueuePolicy::FifoBounded, 16};
    cfg.repetitions = 1;
    return cfg;
}

// ------------------------------------------------------------ criterion 1

void criterion_1() {
    using namespace codec;
    auto expect = [](const MqttPacket& p, std::initializer_list<int> ref) {
        std::vector<uint8_t> v;
        for (int x : ref) v.push_back(static_cast<uint8_t>(x));
        require(encode_packet(p) == v, "reference frame mismatch");
    };
    expect(Connect{"c1", 60, true}, {0x10, 0x0E, 0x00, 0x04, 'M', 'Q', 'T', 'T', 0x04,
                                     0x02, 0x00, 0x3C, 0x00, 0x02, 'c', '1'});
    expect(PubAck{1}, {0x40, 0x02, 0x00, 0x01});
    expect(Publish{"t", 1, 1, {'a'}}, {0x32, 0x06, 0x00, 0x01, 't', 0x00, 0x01, 'a'});

    std::mt19937 rng(2024);
    std::uniform_int_distribution<int> kind(0, 6), byte(0, 255), ch('a', 'z');
    std::uniform_int_distribution<uint32_t> pid(1, 65535);
    auto rand_string = [&](size_t max_len) {
        std::string s;
        size_t n = rng() % (max_len + 1);
        for (size_t i = 0; i < n; ++i) s += static_cast<char>(ch(rng));
        return s;
    };
    int64_t t0 = now_ns();
    for (int i = 0; i < 10000; ++i) {
        MqttPacket p;
        switch (kind(rng)) {
            case 0: p = Connect{rand_string(23), static_cast<uint16_t>(pid(rng)), i % 2 == 0}; break;
            case 1: p = ConnAck{static_cast<uint8_t>(i % 6)}; break;
            case 2: {
                Publish pub;
                pub.topic = "t/" + rand_string(20);
                pub.qos = static_cast<uint8_t>(i % 2);
                if (pub.qos == 1) pub.packet_id = static_cast<uint16_t>(pid(rng));
                size_t n = rng() % 600;
                for (size_t k = 0; k < n; ++k) pub.payload.push_back(static_cast<uint8_t>(byte(rng)));
                p = std::move(pub);
                break;
            }
            case 3: p = PubAck{static_cast<uint16_t>(pid(rng))}; break;
            case 4: p = Subscribe{static_cast<uint16_t>(pid(rng)), rand_string(12), static_cast<uint8_t>(i % 2)}; break;
            case 5: p = SubAck{static_cast<uint16_t>(pid(rng)), static_cast<uint8_t>(i % 2)}; break;
            default: p = Disconnect{}; break;
        }
        auto enc = encode_packet(p);
        auto dec = decode_packet(enc);
        require(dec && dec->consumed == enc.size() && dec->packet == p,
                "round-trip identity violated");
    }
    double secs = static_cast<double>(now_ns() - t0) / kNsPerSec;
    require(secs < 5.0, fmt("codec run took %.2f s (limit 5)", secs));
}

// --------------------------------------------------- criteria 2 and 3

aoi::TimestampLog random_sawtooth_log(std::mt19937& rng, size_t n) {
    std::uniform_int_distribution<int64_t> gap(0, 2 * S);
    std::uniform_int_distribution<int64_t> delay(1, S);
    aoi::TimestampLog log;
    int64_t rx = 0;
    for (size_t i = 0; i < n; ++i) {
        rx += gap(rng);
        log.push_back({i, rx - delay(rng), rx});
    }
    return log;
}

void criterion_2() {
    // hand cases first
    auto sym = aoi::build_sawtooth({{0, 0, 0}, {1, S, S}});
    require(std::fabs(aoi::projection_median(sym) - 0.5 * S) < 1e-3, "hand case 0.5");
    auto g = aoi::build_sawtooth({{0, 0, 0}, {1, S, S}, {2, S, 4 * S}});
    require(std::fabs(aoi::projection_median(g) - 1.0 * S) < 1e-3, "hand case 1.0");
    auto twin = aoi::build_sawtooth(
        {{0, 0, S / 10}, {1, S, S + S / 10}, {2, 2 * S, 2 * S + S / 10}});
    require(std::fabs(aoi::projection_median(twin) - 0.6 * S) < 1e-3, "hand case 0.6");

    std::mt19937 rng(77);
    int64_t t0 = now_ns();
    for (int trial = 0; trial < 1100; ++trial) {
        size_t n = trial % 20 == 0 ? 2 + rng() % 10000 : 2 + rng() % 200;
        auto f = aoi::build_sawtooth(random_sawtooth_log(rng, n));
        if (f.degenerate()) continue;
        double m = aoi::projection_median(f);
        require(std::fabs(aoi::fraction_below(f, m) - 0.5) <= 1e-12,
                "fraction_below(median) deviates beyond 1e-12");
        double oracle = aoi::bisection_median(f, 1.0);  // 1e-9 s on the value axis
        require(std::fabs(m - oracle) <= 1.0, "projection/bisection disagreement > 1 ns");
    }
    double secs = static_cast<double>(now_ns() - t0) / kNsPerSec;
    require(secs < 30.0, fmt("median corpus took %.1f s (limit 30)", secs));
}

void criterion_3() {
    std::mt19937 rng(99);
    // integral_mean internally computes both decompositions and throws beyond
    // 1e-9 relative; exercising the corpus is the agreement check.
    for (int trial = 0; trial < 1100; ++trial) {
        size_t n = trial % 20 == 0 ? 2 + rng() % 10000 : 2 + rng() % 200;
        auto f = aoi::build_sawtooth(random_sawtooth_log(rng, n));
        if (f.degenerate()) continue;
        (void)aoi::integral_mean(f);
    }

    // rate-1-style logs: 1 s period, ~40 ms delay, 60 messages; the 1 kHz
    // arithmetic mean must sit within 1 ms of the exact integral mean.
    std::uniform_int_distribution<int64_t> jitter(-5'000'000, 5'000'000);
    for (int trial = 0; trial < 20; ++trial) {
        aoi::TimestampLog log;
        int64_t rx = 0;
        for (int i = 0; i < 60; ++i) {
            rx += S + jitter(rng);
            log.push_back({(uint64_t)i, rx - 40'000'000 - jitter(rng) / 4, rx});
        }
        auto f = aoi::build_sawtooth(log);
        double exact = aoi::integral_mean(f);
        double acc = 0;
        int64_t count = 0;
        for (int64_t t = f.domain_start; t < f.domain_end; t += 1'000'000) {
            acc += static_cast<double>(aoi::evaluate(f, t));
            ++count;
        }
        double sampled = acc / static_cast<double>(count);
        require(std::fabs(sampled - exact) < 1'000'000.0,
                fmt("sampled vs integral mean differ by %.3f ms",
                    std::fabs(sampled - exact) / 1e6));
    }
}

// ------------------------------------------------------------ criterion 4

void criterion_4() {
    harness::Lab lab(net::TransportKind::PlainStream);
    auto cfg = base_cfg(net::TransportKind::PlainStream, 1, 60);
    cfg.label = "rate1";
    cfg.impair.one_way_delay_ms = 40;
    auto res = lab.run(cfg);
    require_ok(res, "run failed");
    double mean = res.repetitions[0].metrics.mean_aoi_ms;
    require(mean >= 500 && mean <= 580, fmt("mean AoI %.1f ms outside 540 +/- 40", mean));

    auto f = aoi::build_sawtooth(aoi::dedupe(res.repetitions[0].log));
    int64_t min_aoi = f.segments.front().aoi_start;
    for (const auto& s : f.segments) min_aoi = std::min(min_aoi, s.aoi_start);
    require(min_aoi >= 38 * 1'000'000,
            fmt("min AoI %.1f ms below the 38 ms delay floor", min_aoi / 1e6));
}

// ------------------------------------------------------------ criterion 5

void criterion_5() {
    harness::Lab lab(net::TransportKind::PlainStream);

    // decreasing branch of the U: rates 1 -> 10 -> 100 (1000 exercised too)
    struct Leg { double rate, window; };
    std::vector<Leg> legs = {{1, 8}, {10, 3}, {100, 2}, {1000, 2}};
    std::vector<std::vector<double>> medians(legs.size());
    for (int rep = 0; rep < 3; ++rep) {
        for (size_t i = 0; i < legs.size(); ++i) {
            auto cfg = base_cfg(net::TransportKind::PlainStream, legs[i].rate, legs[i].window);
            cfg.label = "sweep";
            cfg.stream.qos = 0;  // AoI ordering needs no acks; keeps the 1000 msg/s leg light
            cfg.impair.one_way_delay_ms = 5;
            auto res = lab.run(cfg);
            require_ok(res, "sweep run failed");
            medians[i].push_back(res.repetitions[0].metrics.median_aoi_ms);
        }
    }
    for (int rep = 0; rep < 3; ++rep) {
        require(medians[0][rep] > medians[1][rep] && medians[1][rep] > medians[2][rep],
                fmt("median AoI not strictly decreasing 1->10->100 (%.1f, %.1f, %.1f)",
                    medians[0][rep], medians[1][rep], medians[2][rep]));
    }

    // overload: a rate-limited link; the backlog a FIFO accumulates must show
    // up as AoI that head-drop avoids
    for (int rep = 0; rep < 3; ++rep) {
        auto mk = [&](mq::QueuePolicy policy, size_t cap) {
            // Large payloads make each message worth ~30 ms of link time, so
            // the FIFO's 16-message backlog separates cleanly from scheduler
            // noise.
            auto cfg = base_cfg(net::TransportKind::PlainStream, 600, 0.6);
            cfg.label = "overload";
            cfg.stream.payload_size = 1200;
            cfg.stream.queue = {policy, cap};
            cfg.stream.transport.nagle_enabled = false;
            cfg.stream.transport.so_sndbuf = 4096;
            cfg.stream.ack_timeout_ms = 120000;
            cfg.impair.rate_limit_bps = 320'000;  // ~40 KB/s
            cfg.impair.stage_limit_bytes = 4096;
            auto res = lab.run(cfg);
            require_ok(res, "overload run failed");
            return res.repetitions[0].metrics.median_aoi_ms;
        };
        double fifo = mk(mq::QueuePolicy::FifoBounded, 16);
        double drop = mk(mq::QueuePolicy::DropHead, 0);
        require(fifo > drop,
                fmt("overload: FIFO-16 median %.1f ms not above DropHead %.1f ms", fifo, drop));
    }
}

// ------------------------------------------------------------ criterion 6

void criterion_6() {
    harness::Lab lab(net::TransportKind::SecureStream);

    auto mk = [&](mq::QueuePolicy policy, size_t cap) {
        // The slow link is the only bottleneck, and small socket and proxy
        // buffers push its backpressure all the way to the blocking push.
        // The rate a FIFO publisher then actually achieves adapts to the
        // link: a deeper queue absorbs more of the backlog before the
        // producer parks, and the one-slot queue pays full TLS record
        // overhead per message on top, so the achieved rate orders by
        // capacity with wide margins.
        auto cfg = base_cfg(net::TransportKind::SecureStream, 2000, 1.5);
        cfg.label = "capacity";
        cfg.stream.qos = 0;
        cfg.stream.payload_size = 16;
        cfg.stream.queue = {policy, cap};
        cfg.stream.transport.nagle_enabled = false;
        cfg.stream.transport.so_sndbuf = 4096;
        cfg.stream.sender_batch_bytes = 8192;
        cfg.repetitions = 3;
        cfg.impair.rate_limit_bps = 60'000;  // 7.5 KB/s
        cfg.impair.stage_limit_bytes = 4096;
        return cfg;
    };

    auto run_rate = [&](size_t cap) {
        auto res = lab.run(mk(mq::QueuePolicy::FifoBounded, cap));
        require_ok(res, "capacity run failed");
        return res.aggregate.median.generation_rate;
    };
    double r1 = run_rate(1);
    double r16 = run_rate(16);
    double r1024 = run_rate(1024);
    require(r1024 >= r16 && r16 >= r1 && r1024 > r1,
            fmt("achieved-rate ordering violated: r1024 %.0f, r16 %.0f, r1 %.0f msg/s",
                r1024, r16, r1));

    // DropHead decouples generation from the link: still overloaded (the link
    // carries <200 msg/s one per record), yet the producer never parks, so the
    // generation rate stays nominal. The lower rate and longer window keep
    // scheduler stalls on the last generation stamp well inside the 1% band.
    auto drop_cfg = mk(mq::QueuePolicy::DropHead, 0);
    drop_cfg.stream.nominal_rate = 400;
    drop_cfg.stream.window_s = 5;
    drop_cfg.repetitions = 3;
    auto res = lab.run(drop_cfg);
    require_ok(res, "drophead run failed");
    double gen = res.aggregate.median.generation_rate;
    require(std::fabs(gen - 400) <= 4,
            fmt("drophead generation rate %.1f msg/s not within 1%% of 400", gen));
    for (const auto& r : res.repetitions)
        require(r.queue.producer_block_ns == 0, "drophead producer blocked");
}

// ------------------------------------------------------------ criterion 7

void criterion_7() {
    harness::Lab lab(net::TransportKind::SecureStream);

    auto run_leg = [&](double rate, double window, bool nagle) {
        auto cfg = base_cfg(net::TransportKind::SecureStream, rate, window);
        cfg.label = "nagle";
        cfg.stream.transport.nagle_enabled = nagle;
        cfg.impair.one_way_delay_ms = 40;  // RTT 80 ms
        cfg.repetitions = 10;
        auto res = lab.run(cfg);
        require_ok(res, "nagle leg failed");
        return res.aggregate.median.median_aoi_ms;
    };

    double on20 = run_leg(20, 3, true);
    double off20 = run_leg(20, 3, false);
    require(on20 >= 1.2 * off20,
            fmt("rate 20: Nagle-on median %.1f ms not >= 20%% above Nagle-off %.1f ms",
                on20, off20));

    double on5 = run_leg(5, 4, true);
    double off5 = run_leg(5, 4, false);
    require(std::fabs(on5 - off5) < 0.10 * std::max(on5, off5),
            fmt("rate 5: Nagle on/off medians differ >= 10%% (%.1f vs %.1f ms)", on5, off5));
}

// ------------------------------------------------------------ criterion 8

void criterion_8() {
    auto writes_per_message = [&](net::TransportKind kind, std::optional<bool> nagle,
                                  size_t batch_bytes) {
        harness::Lab lab(kind);
        auto cfg = base_cfg(kind, 2000, 1.5);
        cfg.label = "aggregation";
        cfg.stream.payload_size = 32;
        cfg.stream.sender_batch_bytes = batch_bytes;
        cfg.stream.transport.nagle_enabled = nagle;
        cfg.impair.one_way_delay_ms = 10;  // acks lag the publishes
        auto res = lab.run(cfg);
        require_ok(res, "aggregation run failed");
        const auto& rep = res.repetitions[0];
        uint64_t sent = 0;
        for (const auto& r : rep.publish_log)
            if (r.send_ns) ++sent;
        require(sent > 100, "too few sends");
        // exclude the connect and disconnect frames
        double writes = static_cast<double>(rep.transport.writes) - 2;
        return writes / static_cast<double>(sent);
    };

    double on = writes_per_message(net::TransportKind::SecureStream, true, 1);
    require(on < 1.0, fmt("Nagle-on writes/message %.3f not < 1", on));

    double off = writes_per_message(net::TransportKind::SecureStream, false, 1);
    require(off > 0.9 && off < 1.1, fmt("Nagle-off writes/message %.3f not ~= 1", off));

    double quic = writes_per_message(net::TransportKind::Quic, std::nullopt, 8192);
    require(quic <= off + 1e-9, fmt("QUIC writes/message %.3f above Nagle-off %.3f", quic, off));
    require(quic >= 0.3 && quic <= 1.0, fmt("QUIC writes/message %.3f outside [0.3, 1.0]", quic));
}

// ------------------------------------------------------------ criterion 9

void criterion_9() {
    std::mt19937 rng(4242);
    std::uniform_real_distribution<double> coord(0.1, 100);
    std::uniform_int_distribution<int> quant(1, 6);
    int64_t t0 = now_ns();
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<pareto::ParetoPoint> pts;
        size_t n = 1 + rng() % 200;
        for (size_t i = 0; i < n; ++i) {
            double a = std::floor(coord(rng) * quant(rng)) / quant(rng) + 0.1;
            double p = std::floor(coord(rng) * quant(rng)) / quant(rng);
            pts.push_back({"p" + std::to_string(i), a, p, std::nullopt});
        }
        auto fast = pareto::pareto_front(pts);

        std::vector<std::string> brute;
        for (const auto& p : pts) {
            bool dominated = false;
            for (const auto& q : pts)
                if (q.aoi_ms <= p.aoi_ms && q.power_w <= p.power_w &&
                    (q.aoi_ms < p.aoi_ms || q.power_w < p.power_w)) {
                    dominated = true;
                    break;
                }
            if (!dominated) brute.push_back(p.label);
        }
        std::vector<std::string> fastl;
        for (const auto& p : fast) fastl.push_back(p.label);
        std::sort(brute.begin(), brute.end());
        std::sort(fastl.begin(), fastl.end());
        require(brute == fastl, "front differs from brute-force dominance filter");

        auto again = pareto::pareto_front(fast);
        require(again.size() == fast.size(), "idempotence violated");
        auto shuffled = pts;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        auto perm = pareto::pareto_front(shuffled);
        std::vector<std::string> perml;
        for (const auto& p : perm) perml.push_back(p.label);
        std::sort(perml.begin(), perml.end());
        require(perml == fastl, "permutation invariance violated");
    }
    double secs = static_cast<double>(now_ns() - t0) / kNsPerSec;
    require(secs < 10.0, fmt("pareto corpus took %.1f s (limit 10)", secs));
}

// ------------------------------------------------------------ criterion 10

void criterion_10() {
    net::ListenConfig lc;
    lc.kind = net::TransportKind::PlainStream;
    auto upstream = net::listen(lc);
    std::thread echo([&] {
        for (;;) {
            auto conn = upstream->accept();
            if (!conn) return;
            std::thread([c = std::move(conn)] {
                uint8_t buf[16384];
                try {
                    for (;;) {
                        size_t n = c->recv(buf);
                        if (n == 0) break;
                        c->send({buf, n});
                    }
                } catch (const net::TransportError&) {
                }
            }).detach();
        }
    });

    auto dial = [](uint16_t port) {
        net::TransportConfig cfg;
        cfg.kind = net::TransportKind::PlainStream;
        cfg.port = port;
        cfg.nagle_enabled = false;
        return net::connect(cfg);
    };
    // Scheduler stalls only ever inflate an RTT sample, so a low percentile
    // over many pings estimates the true round trip.
    auto typical_rtt_ms = [&](net::Connection& conn) {
        std::vector<double> rtts;
        std::vector<uint8_t> ping{1, 2, 3, 4};
        uint8_t buf[64];
        for (int i = 0; i < 31; ++i) {
            int64_t t0 = now_ns();
            conn.send(ping);
            size_t got = 0;
            while (got < 4) got += conn.recv(buf);
            rtts.push_back(static_cast<double>(now_ns() - t0) / kNsPerMs);
        }
        return pareto::percentile(std::move(rtts), 25);
    };

    auto direct = dial(upstream->port());
    double base_ms = typical_rtt_ms(*direct);
    direct->close();

    std::vector<std::pair<int64_t, double>> inflations;
    for (int64_t d : {20, 40, 80}) {
        netem::ImpairmentConfig pc;
        pc.upstream_port = upstream->port();
        pc.one_way_delay_ms = d;
        auto proxy = netem::run_proxy(pc);
        auto conn = dial(proxy->port());
        inflations.emplace_back(d, typical_rtt_ms(*conn) - base_ms);
        conn->close();
        proxy->stop();
    }

    // bulk goodput under a 5 Mbit/s limit
    double goodput_bps = 0;
    {
        netem::ImpairmentConfig pc;
        pc.upstream_port = upstream->port();
        pc.rate_limit_bps = 5'000'000;
        auto proxy = netem::run_proxy(pc);
        auto conn = dial(proxy->port());
        const size_t kBytes = 2'000'000;
        std::thread sender([&] {
            std::vector<uint8_t> blob(kBytes, 0x5C);
            conn->send(blob);
        });
        uint8_t buf[16384];
        size_t got = 0;
        int64_t t0 = now_ns();
        while (got < kBytes) got += conn->recv(buf);
        double secs = static_cast<double>(now_ns() - t0) / kNsPerSec;
        sender.join();
        conn->close();
        proxy->stop();
        goodput_bps = static_cast<double>(kBytes) * 8 / secs;
    }

    upstream->close();
    echo.join();

    for (auto [d, inflation] : inflations)
        require(std::fabs(inflation - 2.0 * static_cast<double>(d)) <=
                    0.1 * 2.0 * static_cast<double>(d),
                fmt("delay %.0f ms: RTT inflation %.1f ms not 2d +/- 10%%",
                    static_cast<double>(d), inflation));
    require(std::fabs(goodput_bps - 5e6) <= 0.1 * 5e6,
            fmt("bulk goodput %.2f Mbit/s not within 10%% of 5", goodput_bps / 1e6));
}

// ------------------------------------------------------------ criterion 11

void criterion_11() {
    auto write_temp = [](const std::string& name, const std::string& content) {
        std::string path = "/tmp/" + name;
        std::ofstream out(path);
        out << content;
        return path;
    };
    {
        std::string trace = "time_s,power_w\n";
        for (int t = 0; t <= 60; ++t) trace += std::to_string(t) + ",2\n";
        auto e = harness::ingest_energy_trace(write_temp("acc_const.csv", trace));
        require(std::fabs(e.energy_j - 120) <= 120e-6, "constant-trace energy");
        require(std::fabs(e.avg_power_w - 2) <= 2e-6, "constant-trace power");
    }
    {
        std::string trace = "time_s,power_w\n";
        for (int t = 0; t <= 10; ++t)
            trace += std::to_string(t) + "," + std::to_string(0.2 * t) + "\n";
        auto e = harness::ingest_energy_trace(write_temp("acc_ramp.csv", trace));
        require(std::fabs(e.energy_j - 10) <= 10e-6, "ramp-trace energy");
        require(std::fabs(e.avg_power_w - 1) <= 1e-6, "ramp-trace power");
    }
    {
        std::string trace = "time_s,power_w\n";
        for (int t = 0; t <= 60; t += 3) trace += std::to_string(t) + ",1.5\n";
        auto path = write_temp("acc_win.csv", trace);
        auto e = harness::ingest_energy_trace(path, std::make_pair(12.0, 24.0));
        require(std::fabs(e.duration_s - 12) <= 1e-9, "window duration");
        require(std::fabs(e.avg_power_w - e.energy_j / e.duration_s) <= 1e-12,
                "P_avg = E / T identity");
        require(std::fabs(e.energy_j - 18) <= 18e-6, "windowed energy");
    }
}

// ------------------------------------------------------------ criterion 12

void criterion_12() {
    harness::Lab lab(net::TransportKind::PlainStream);
    auto cfg = base_cfg(net::TransportKind::PlainStream, 200, 3);
    cfg.label = "pipelining";
    cfg.stream.queue = {mq::QueuePolicy::FifoBounded, 1024};
    cfg.impair.one_way_delay_ms = 40;  // RTT 80 ms: no-pipelining bound 12.5 msg/s
    auto res = lab.run(cfg);
    require_ok(res, "pipelining run failed");
    double rate = res.repetitions[0].metrics.real_rate;
    require(rate >= 100, fmt("sustained %.1f msg/s, need >= 100 against RTT 80 ms", rate));
}

using Criterion = std::function<void()>;

struct Entry {
    int n;
    const char* what;
    Criterion fn;
};

const std::vector<Entry> kCriteria = {
    {1, "codec round-trip and reference frames", criterion_1},
    {2, "exact median with bisection oracle", criterion_2},
    {3, "integral mean decompositions and sampling", criterion_3},
    {4, "rate-1 end-to-end mean AoI", criterion_4},
    {5, "rate sweep and FIFO/DropHead overload split", criterion_5},
    {6, "queue-capacity throughput ordering", criterion_6},
    {7, "send-coalescing AoI anomaly at rate 20", criterion_7},
    {8, "aggregation observability via write counters", criterion_8},
    {9, "pareto front vs brute-force oracle", criterion_9},
    {10, "proxy delay and rate calibration", criterion_10},
    {11, "energy trace ingestion", criterion_11},
    {12, "pipelined rate above the RTT bound", criterion_12},
};

}  // namespace

int main(int argc, char** argv) {
    int only = argc > 1 ? std::atoi(argv[1]) : 0;
    int failures = 0;
    for (const auto& e : kCriteria) {
        if (only && e.n != only) continue;
        try {
            e.fn();
            std::printf("PASS criterion %d: %s\n", e.n, e.what);
        } catch (const std::exception& ex) {
            std::printf("FAIL criterion %d: %s — %s\n", e.n, e.what, ex.what());
            ++failures;
        }
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
