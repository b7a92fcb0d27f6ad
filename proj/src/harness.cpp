#include "aoibench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "aoibench/broker.hpp"
#include "aoibench/certs.hpp"
#include "aoibench/codec.hpp"
#include "aoibench/pareto.hpp"
#include "aoibench/time.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace aoibench::harness {

// ---------------------------------------------------------------- energy

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

EnergySummary ingest_energy_trace(const std::string& path,
                                  std::optional<std::pair<double, double>> window) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("empty trace: " + path);
    auto cols = split(trim(header), ',');
    for (auto& c : cols) c = trim(c);

    bool direct;
    if (cols == std::vector<std::string>{"time_s", "power_w"}) {
        direct = true;
    } else if (cols == std::vector<std::string>{"time_s", "current_a", "voltage_v"}) {
        direct = false;
    } else {
        throw std::runtime_error("unknown trace schema: " + header);
    }

    std::vector<std::pair<double, double>> samples;  // (t, power)
    std::string line;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        auto f = split(line, ',');
        if (f.size() != (direct ? 2u : 3u))
            throw std::runtime_error(path + ": bad field count at line " +
                                     std::to_string(lineno));
        double t = std::stod(f[0]);
        double p = direct ? std::stod(f[1]) : std::stod(f[1]) * std::stod(f[2]);
        if (!samples.empty() && t <= samples.back().first)
            throw std::runtime_error(path + ": time not strictly increasing at line " +
                                     std::to_string(lineno));
        samples.emplace_back(t, p);
    }
    if (samples.size() < 2) throw std::runtime_error(path + ": need at least two samples");

    if (window) {
        auto [a, b] = *window;
        if (!(a < b)) throw std::runtime_error("empty window");
        a = std::max(a, samples.front().first);
        b = std::min(b, samples.back().first);
        if (!(a < b)) throw std::runtime_error("window outside trace");
        auto value_at = [&](double t) {
            auto it = std::lower_bound(samples.begin(), samples.end(), t,
                                       [](const auto& s, double v) { return s.first < v; });
            if (it->first == t) return it->second;
            auto [t1, p1] = *(it - 1);
            auto [t2, p2] = *it;
            return p1 + (p2 - p1) * (t - t1) / (t2 - t1);
        };
        std::vector<std::pair<double, double>> clipped;
        clipped.emplace_back(a, value_at(a));
        for (auto& s : samples)
            if (s.first > a && s.first < b) clipped.push_back(s);
        clipped.emplace_back(b, value_at(b));
        samples = std::move(clipped);
    }

    EnergySummary e;
    for (size_t i = 1; i < samples.size(); ++i) {
        double dt = samples[i].first - samples[i - 1].first;
        e.energy_j += 0.5 * (samples[i].second + samples[i - 1].second) * dt;
    }
    e.duration_s = samples.back().first - samples.front().first;
    e.avg_power_w = e.energy_j / e.duration_s;
    return e;
}

// ------------------------------------------------------------ subscriber

struct Collector::Impl {
    SubscribeConfig cfg;
    std::unique_ptr<net::Connection> conn;
    std::thread reader;
    std::thread idle_monitor;

    std::mutex m;
    std::condition_variable cv;
    SubscribeResult result;
    bool done = false;
    std::atomic<int64_t> last_rx_ns{0};
    std::atomic<bool> stopping{false};

    void reader_loop() {
        std::vector<uint8_t> buf;
        uint8_t chunk[8192];
        try {
            for (;;) {
                size_t n = conn->recv(chunk);
                if (n == 0) break;
                int64_t rx = now_ns();
                last_rx_ns.store(rx, std::memory_order_relaxed);
                buf.insert(buf.end(), chunk, chunk + n);
                bool reached = false;
                {
                    std::lock_guard lk(m);
                    while (auto d = codec::decode_packet(buf)) {
                        buf.erase(buf.begin(), buf.begin() + static_cast<long>(d->consumed));
                        auto* pub = std::get_if<codec::Publish>(&d->packet);
                        if (!pub) continue;
                        uint64_t seq;
                        int64_t gen;
                        if (!client::parse_payload(pub->payload, seq, gen)) {
                            ++result.rejected;
                            continue;
                        }
                        result.log.push_back({seq, gen, rx});
                        if (cfg.stop_after && result.log.size() >= cfg.stop_after)
                            reached = true;
                    }
                }
                cv.notify_all();
                if (reached) break;
            }
        } catch (const net::ConnectionClosed&) {
        } catch (const std::exception& e) {
            std::lock_guard lk(m);
            if (!stopping.load()) {
                result.failed = true;
                result.failure = e.what();
            }
        }
        {
            std::lock_guard lk(m);
            done = true;
        }
        cv.notify_all();
    }

    void idle_loop() {
        const int64_t limit = static_cast<int64_t>(cfg.idle_timeout_ms) * kNsPerMs;
        std::unique_lock lk(m);
        for (;;) {
            if (cv.wait_for(lk, std::chrono::milliseconds(100), [&] { return done; }))
                return;
            if (now_ns() - last_rx_ns.load(std::memory_order_relaxed) > limit) {
                lk.unlock();
                try {
                    conn->close();
                } catch (...) {
                }
                return;
            }
        }
    }
};

Collector::Collector(SubscribeConfig cfg) : impl_(std::make_unique<Impl>()) {
    impl_->cfg = std::move(cfg);
}

Collector::~Collector() {
    if (impl_->reader.joinable()) stop();
}

void Collector::start() {
    auto& im = *impl_;
    im.cfg.transport.validate();
    im.conn = net::connect(im.cfg.transport);

    // Handshake + subscribe before any reader thread exists.
    std::vector<uint8_t> buf;
    uint8_t chunk[1024];
    auto read_one = [&]() -> codec::MqttPacket {
        for (;;) {
            if (auto d = codec::decode_packet(buf)) {
                buf.erase(buf.begin(), buf.begin() + static_cast<long>(d->consumed));
                return std::move(d->packet);
            }
            size_t n = im.conn->recv(chunk);
            if (n == 0) throw net::TransportError("connection closed during subscribe");
            buf.insert(buf.end(), chunk, chunk + n);
        }
    };

    im.conn->send(codec::encode_packet(
        codec::Connect{"sub-" + std::to_string(now_ns() & 0xffffff), 60, true}));
    auto ack = read_one();
    auto* ca = std::get_if<codec::ConnAck>(&ack);
    if (!ca || ca->return_code != 0) throw net::TransportError("subscriber connack failed");

    im.conn->send(codec::encode_packet(codec::Subscribe{1, im.cfg.topic, 0}));
    auto sa = read_one();
    auto* s = std::get_if<codec::SubAck>(&sa);
    if (!s || s->return_code == 0x80) throw net::TransportError("subscribe rejected");

    // Publishes can already be interleaved behind the suback.
    if (!buf.empty()) {
        int64_t rx = now_ns();
        std::lock_guard lk(im.m);
        while (auto d = codec::decode_packet(buf)) {
            buf.erase(buf.begin(), buf.begin() + static_cast<long>(d->consumed));
            if (auto* pub = std::get_if<codec::Publish>(&d->packet)) {
                uint64_t seq;
                int64_t gen;
                if (client::parse_payload(pub->payload, seq, gen))
                    im.result.log.push_back({seq, gen, rx});
                else
                    ++im.result.rejected;
            }
        }
    }

    im.last_rx_ns.store(now_ns(), std::memory_order_relaxed);
    im.reader = std::thread([this] { impl_->reader_loop(); });
    if (im.cfg.idle_timeout_ms > 0)
        im.idle_monitor = std::thread([this] { impl_->idle_loop(); });
}

bool Collector::wait_for_count(uint64_t n, int timeout_ms) {
    auto& im = *impl_;
    std::unique_lock lk(im.m);
    return im.cv.wait_for(lk, std::chrono::milliseconds(timeout_ms),
                          [&] { return im.result.log.size() >= n || im.done; }) &&
           im.result.log.size() >= n;
}

SubscribeResult Collector::stop() {
    auto& im = *impl_;
    im.stopping.store(true);
    try {
        im.conn->close();
    } catch (...) {
    }
    if (im.reader.joinable()) im.reader.join();
    if (im.idle_monitor.joinable()) im.idle_monitor.join();
    std::lock_guard lk(im.m);
    return std::move(im.result);
}

SubscribeResult subscribe_collect(const SubscribeConfig& cfg) {
    Collector c(cfg);
    try {
        c.start();
    } catch (const std::exception& e) {
        SubscribeResult r;
        r.failed = true;
        r.failure = e.what();
        return r;
    }
    auto& im = *c.impl_;
    {
        std::unique_lock lk(im.m);
        im.cv.wait(lk, [&] { return im.done; });
    }
    return c.stop();
}

// ------------------------------------------------------------ experiments

namespace {

struct ImpairKey {
    double delay_ms = 0;
    int64_t bps = -1;
    size_t stage = 0;
    netem::ProxyMode mode = netem::ProxyMode::Stream;
    bool operator==(const ImpairKey&) const = default;
};

RunMetrics compute_metrics(const aoi::TimestampLog& raw,
                           const std::vector<client::PublishRecord>& pub,
                           const mq::QueueCounters& q,
                           const std::optional<double>& power_w) {
    RunMetrics m;
    auto log = aoi::dedupe(raw);
    auto f = aoi::build_sawtooth(log);
    m.mean_aoi_ms = aoi::integral_mean(f) / 1e6;
    m.median_aoi_ms = aoi::projection_median(f) / 1e6;
    m.peak_aoi_ms = static_cast<double>(aoi::peak_aoi(f)) / 1e6;
    m.real_rate = aoi::real_rate(log);
    if (pub.size() >= 2) {
        double span_s =
            static_cast<double>(pub.back().gen_ns - pub.front().gen_ns) / kNsPerSec;
        if (span_s > 0) m.generation_rate = static_cast<double>(pub.size() - 1) / span_s;
    }
    m.dropped = q.dropped;
    m.avg_power_w = power_w;
    return m;
}

double metric_field(const RunMetrics& m, int i) {
    switch (i) {
        case 0: return m.mean_aoi_ms;
        case 1: return m.median_aoi_ms;
        case 2: return m.peak_aoi_ms;
        case 3: return m.real_rate;
        case 4: return m.generation_rate;
        case 5: return static_cast<double>(m.dropped);
        default: return m.avg_power_w.value_or(0);
    }
}

void set_metric_field(RunMetrics& m, int i, double v, bool has_power) {
    switch (i) {
        case 0: m.mean_aoi_ms = v; break;
        case 1: m.median_aoi_ms = v; break;
        case 2: m.peak_aoi_ms = v; break;
        case 3: m.real_rate = v; break;
        case 4: m.generation_rate = v; break;
        case 5: m.dropped = static_cast<uint64_t>(std::llround(v)); break;
        default:
            if (has_power) m.avg_power_w = v;
    }
}

Aggregate aggregate_metrics(const std::vector<Repetition>& reps) {
    Aggregate agg;
    bool has_power = false;
    for (const auto& r : reps)
        if (!r.failed && r.metrics.avg_power_w) has_power = true;
    for (int i = 0; i < 7; ++i) {
        std::vector<double> vals;
        for (const auto& r : reps)
            if (!r.failed) vals.push_back(metric_field(r.metrics, i));
        if (vals.empty()) continue;
        set_metric_field(agg.median, i, pareto::percentile(vals, 50), has_power);
        set_metric_field(agg.p25, i, pareto::percentile(vals, 25), has_power);
        set_metric_field(agg.p75, i, pareto::percentile(vals, 75), has_power);
    }
    return agg;
}

}  // namespace

struct Lab::Impl {
    net::TransportKind kind_;
    net::LabCredentials creds;
    std::unique_ptr<broker::Broker> brk;
    std::unique_ptr<netem::Proxy> proxy;
    ImpairKey proxy_key;

    explicit Impl(net::TransportKind kind) : kind_(kind) {
        creds = net::generate_lab_credentials();
        std::vector<net::ListenConfig> ls;
        ls.push_back({net::TransportKind::PlainStream, "127.0.0.1", 0, "", "", 65536});
        if (kind != net::TransportKind::PlainStream) {
            ls.push_back({kind, "127.0.0.1", 0, creds.server_cert_pem,
                          creds.server_key_pem, 65536});
        }
        brk = broker::serve(std::move(ls));
    }

    void ensure_proxy(const Impairment& imp) {
        ImpairKey key{imp.one_way_delay_ms,
                      imp.rate_limit_bps.value_or(-1),
                      imp.stage_limit_bytes,
                      kind_ == net::TransportKind::Quic ? netem::ProxyMode::Datagram
                                                        : netem::ProxyMode::Stream};
        if (proxy && key == proxy_key) return;
        if (proxy) proxy->stop();
        netem::ImpairmentConfig pc;
        pc.one_way_delay_ms = static_cast<int64_t>(std::llround(key.delay_ms));
        if (imp.rate_limit_bps) pc.rate_limit_bps = imp.rate_limit_bps;
        pc.upstream_port = brk->port(kind_);
        pc.mode = key.mode;
        pc.stage_limit_bytes = key.stage;
        proxy = netem::run_proxy(pc);
        proxy_key = key;
    }

    Repetition run_once(const ExperimentConfig& cfg) {
        Repetition rep;

        SubscribeConfig sc;
        sc.transport.kind = net::TransportKind::PlainStream;
        sc.transport.host = "127.0.0.1";
        sc.transport.port = brk->port(net::TransportKind::PlainStream);
        sc.topic = cfg.stream.topic;
        sc.idle_timeout_ms = 0;  // orchestrator-driven stop
        Collector sub(sc);
        sub.start();

        client::StreamConfig scfg = cfg.stream;
        scfg.transport.host = "127.0.0.1";
        scfg.transport.port = proxy->port();
        if (scfg.transport.kind != net::TransportKind::PlainStream &&
            scfg.transport.trust == net::TlsTrust::Verify) {
            scfg.transport.trust = net::TlsTrust::TrustGivenRoot;
            scfg.transport.ca_pem = creds.ca_cert_pem;
            scfg.transport.server_name = "localhost";
        }

        auto res = client::stream_run(scfg);
        rep.publish_log = std::move(res.records);
        rep.queue = res.queue;
        rep.transport = res.transport;
        if (res.failed) {
            rep.failed = true;
            rep.failure = res.failure;
            sub.stop();
            return rep;
        }

        uint64_t delivered = 0;
        for (const auto& r : rep.publish_log)
            if (r.send_ns) ++delivered;
        int wait_ms = 10000 + static_cast<int>(4 * cfg.impair.one_way_delay_ms);
        sub.wait_for_count(delivered, wait_ms);
        auto got = sub.stop();
        if (got.failed) {
            rep.failed = true;
            rep.failure = "subscriber: " + got.failure;
            return rep;
        }
        rep.log = std::move(got.log);
        if (delivered >= 2 && rep.log.size() < 2) {
            rep.failed = true;
            rep.failure = "subscriber received too few messages";
            return rep;
        }

        std::optional<double> power;
        if (!cfg.energy_trace.empty())
            power = ingest_energy_trace(cfg.energy_trace).avg_power_w;
        rep.metrics = compute_metrics(rep.log, rep.publish_log, rep.queue, power);
        return rep;
    }
};

Lab::Lab(net::TransportKind kind) : impl_(std::make_unique<Impl>(kind)) {}

Lab::~Lab() {
    if (impl_->proxy) impl_->proxy->stop();
    impl_->brk->stop();
}

net::TransportKind Lab::kind() const { return impl_->kind_; }

uint16_t Lab::broker_port(net::TransportKind kind) const { return impl_->brk->port(kind); }

const std::string& Lab::ca_pem() const { return impl_->creds.ca_cert_pem; }

ExperimentResult Lab::run(const ExperimentConfig& cfg) {
    if (cfg.stream.transport.kind != impl_->kind_)
        throw std::invalid_argument("experiment transport kind differs from lab kind");
    if (cfg.repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
    if (cfg.wallclock_budget_s > 0 &&
        cfg.repetitions * cfg.stream.window_s > cfg.wallclock_budget_s)
        throw std::invalid_argument("repetitions x window exceeds wall-clock budget");

    impl_->ensure_proxy(cfg.impair);

    ExperimentResult result;
    result.label = cfg.label;
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
        Repetition r;
        for (int attempt = 1; attempt <= 3; ++attempt) {
            r = impl_->run_once(cfg);
            r.attempts = attempt;
            if (!r.failed) break;
        }
        if (r.failed) result.failed = true;

        if (!cfg.output_dir.empty()) {
            fs::path dir = fs::path(cfg.output_dir) / cfg.label;
            fs::create_directories(dir);
            std::string n = std::to_string(rep);
            aoi::write_log_csv(r.log, (dir / ("timestamps_rep" + n + ".csv")).string());
            client::write_publish_csv(r.publish_log,
                                      (dir / ("publish_rep" + n + ".csv")).string());
        }
        result.repetitions.push_back(std::move(r));
    }
    result.aggregate = aggregate_metrics(result.repetitions);
    return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    Lab lab(cfg.stream.transport.kind);
    return lab.run(cfg);
}

// --------------------------------------------------------------- grids

namespace {

mq::QueuePolicy queue_policy_from(const std::string& s, size_t& cap) {
    if (s == "unbounded") return mq::QueuePolicy::FifoUnbounded;
    if (s == "drophead") return mq::QueuePolicy::DropHead;
    if (s.rfind("bounded:", 0) == 0) {
        cap = std::stoul(s.substr(8));
        return mq::QueuePolicy::FifoBounded;
    }
    throw std::runtime_error("unknown queue policy: " + s);
}

}  // namespace

std::vector<ExperimentConfig> parse_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_grid_text(ss.str());
}

std::vector<ExperimentConfig> parse_grid_text(const std::string& text) {
    // key=value; comma-separated values expand to the Cartesian product.
    // exclude=key:value,key:value removes combinations matching every pair.
    std::map<std::string, std::vector<std::string>> axes;
    std::vector<std::map<std::string, std::string>> excludes;

    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("bad grid line: " + line);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key == "exclude") {
            std::map<std::string, std::string> ex;
            for (auto& pair : split(value, ',')) {
                auto colon = pair.find(':');
                if (colon == std::string::npos)
                    throw std::runtime_error("bad exclude clause: " + pair);
                ex[trim(pair.substr(0, colon))] = trim(pair.substr(colon + 1));
            }
            excludes.push_back(std::move(ex));
            continue;
        }
        std::vector<std::string> vals;
        for (auto& v : split(value, ',')) vals.push_back(trim(v));
        axes[key] = std::move(vals);
    }

    static const std::vector<std::string> known = {
        "transport", "rate",  "window",   "payload",      "qos",
        "queue",     "delay_ms", "rate_limit_bps", "nagle", "gso",
        "reps",      "output_dir", "energy_trace", "topic"};
    for (auto& [k, _] : axes)
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw std::runtime_error("unknown grid key: " + k);

    auto axis = [&](const std::string& k,
                    std::vector<std::string> dflt) -> std::vector<std::string> {
        auto it = axes.find(k);
        return it == axes.end() ? dflt : it->second;
    };

    // Product axes in fixed order so labels are deterministic.
    struct Axis {
        std::string key;
        std::vector<std::string> values;
    };
    std::vector<Axis> prod = {
        {"transport", axis("transport", {"plain"})},
        {"rate", axis("rate", {"1"})},
        {"window", axis("window", {"1"})},
        {"payload", axis("payload", {"128"})},
        {"qos", axis("qos", {"1"})},
        {"queue", axis("queue", {"bounded:16"})},
        {"delay_ms", axis("delay_ms", {"0"})},
        {"rate_limit_bps", axis("rate_limit_bps", {"0"})},
        {"nagle", axis("nagle", {"default"})},
        {"gso", axis("gso", {"default"})},
    };

    std::vector<ExperimentConfig> out;
    std::vector<size_t> idx(prod.size(), 0);
    for (;;) {
        std::map<std::string, std::string> combo;
        for (size_t i = 0; i < prod.size(); ++i) combo[prod[i].key] = prod[i].values[idx[i]];

        bool skip = false;
        for (const auto& ex : excludes) {
            bool all = true;
            for (const auto& [k, v] : ex)
                if (combo.count(k) == 0 || combo[k] != v) {
                    all = false;
                    break;
                }
            if (all) {
                skip = true;
                break;
            }
        }

        if (!skip) {
            ExperimentConfig cfg;
            cfg.stream.transport.kind = net::transport_kind_from_string(combo["transport"]);
            cfg.stream.nominal_rate = std::stod(combo["rate"]);
            cfg.stream.window_s = std::stod(combo["window"]);
            cfg.stream.payload_size = std::stoul(combo["payload"]);
            cfg.stream.qos = static_cast<uint8_t>(std::stoi(combo["qos"]));
            cfg.stream.queue.policy =
                queue_policy_from(combo["queue"], cfg.stream.queue.capacity);
            cfg.stream.topic = axis("topic", {"aoi"})[0];
            cfg.impair.one_way_delay_ms = std::stod(combo["delay_ms"]);
            int64_t bps = std::stoll(combo["rate_limit_bps"]);
            if (bps > 0) cfg.impair.rate_limit_bps = bps;
            if (combo["nagle"] != "default")
                cfg.stream.transport.nagle_enabled = combo["nagle"] == "on";
            if (combo["gso"] != "default")
                cfg.stream.transport.segmentation_offload = combo["gso"] == "on";
            cfg.repetitions = std::stoi(axis("reps", {"1"})[0]);
            cfg.output_dir = axis("output_dir", {""})[0];
            cfg.energy_trace = axis("energy_trace", {""})[0];

            std::ostringstream label;
            label << combo["transport"] << "-rate" << combo["rate"] << "-win"
                  << combo["window"] << "-pay" << combo["payload"] << "-qos"
                  << combo["qos"] << "-" << combo["queue"] << "-delay"
                  << combo["delay_ms"];
            if (bps > 0) label << "-bps" << bps;
            if (combo["nagle"] != "default") label << "-nagle_" << combo["nagle"];
            if (combo["gso"] != "default") label << "-gso_" << combo["gso"];
            std::string l = label.str();
            std::replace(l.begin(), l.end(), ':', '_');
            cfg.label = l;
            out.push_back(std::move(cfg));
        }

        size_t i = prod.size();
        while (i > 0) {
            --i;
            if (++idx[i] < prod[i].values.size()) break;
            idx[i] = 0;
            if (i == 0) return out;
        }
    }
}

// -------------------------------------------------------------- reports

namespace {

nlohmann::ordered_json metrics_json(const RunMetrics& m) {
    nlohmann::ordered_json j;
    j["mean_aoi_ms"] = m.mean_aoi_ms;
    j["median_aoi_ms"] = m.median_aoi_ms;
    j["peak_aoi_ms"] = m.peak_aoi_ms;
    j["real_rate"] = m.real_rate;
    j["generation_rate"] = m.generation_rate;
    j["dropped"] = m.dropped;
    if (m.avg_power_w)
        j["avg_power_w"] = *m.avg_power_w;
    else
        j["avg_power_w"] = nullptr;
    return j;
}

}  // namespace

void emit_report(const std::vector<ExperimentResult>& results, const std::string& dir) {
    fs::create_directories(dir);

    nlohmann::ordered_json root = nlohmann::ordered_json::object();
    for (const auto& res : results) {
        nlohmann::ordered_json cell;
        cell["status"] = res.failed ? "failed" : "ok";
        nlohmann::ordered_json reps = nlohmann::ordered_json::array();
        for (const auto& r : res.repetitions) {
            nlohmann::ordered_json rj;
            rj["attempts"] = r.attempts;
            rj["status"] = r.failed ? "failed" : "ok";
            if (r.failed) rj["failure"] = r.failure;
            rj["metrics"] = metrics_json(r.metrics);
            reps.push_back(std::move(rj));
        }
        cell["repetitions"] = std::move(reps);
        cell["aggregate"]["median"] = metrics_json(res.aggregate.median);
        cell["aggregate"]["p25"] = metrics_json(res.aggregate.p25);
        cell["aggregate"]["p75"] = metrics_json(res.aggregate.p75);
        root[res.label] = std::move(cell);
    }
    {
        std::ofstream out(fs::path(dir) / "report.json");
        out << root.dump(2) << '\n';
    }

    // Full metrics table.
    {
        std::ofstream out(fs::path(dir) / "metrics.csv");
        out << "label,status,mean_aoi_ms,median_aoi_ms,peak_aoi_ms,real_rate,"
               "generation_rate,dropped,avg_power_w,attempts\n";
        char buf[64];
        auto num = [&](double v) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            return std::string(buf);
        };
        for (const auto& res : results) {
            int max_attempts = 1;
            for (const auto& r : res.repetitions)
                max_attempts = std::max(max_attempts, r.attempts);
            const auto& m = res.aggregate.median;
            out << res.label << ',' << (res.failed ? "failed" : "ok") << ','
                << num(m.mean_aoi_ms) << ',' << num(m.median_aoi_ms) << ','
                << num(m.peak_aoi_ms) << ',' << num(m.real_rate) << ','
                << num(m.generation_rate) << ',' << m.dropped << ',';
            if (m.avg_power_w) out << num(*m.avg_power_w);
            out << ',' << max_attempts << '\n';
        }
    }

    // Pareto export for the cells that carry power.
    std::vector<pareto::ParetoPoint> points;
    for (const auto& res : results) {
        if (res.failed || !res.aggregate.median.avg_power_w) continue;
        pareto::ParetoPoint p;
        p.label = res.label;
        p.aoi_ms = res.aggregate.median.median_aoi_ms;
        p.power_w = *res.aggregate.median.avg_power_w;
        p.band = pareto::PercentileBand{
            res.aggregate.p25.median_aoi_ms, res.aggregate.p75.median_aoi_ms,
            res.aggregate.p25.avg_power_w.value_or(p.power_w),
            res.aggregate.p75.avg_power_w.value_or(p.power_w)};
        points.push_back(std::move(p));
    }
    if (!points.empty()) {
        auto front = pareto::pareto_front(points);
        pareto::write_front_csv(points, front, (fs::path(dir) / "front.csv").string());
    }
}

}  // namespace aoibench::harness
