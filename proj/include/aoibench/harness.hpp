#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aoibench/aoi.hpp"
#include "aoibench/client.hpp"
#include "aoibench/netem.hpp"
#include "aoibench/transport.hpp"

namespace aoibench::harness {

// Energy trace ingestion. Accepts `time_s,power_w` or
// `time_s,current_a,voltage_v` with strictly increasing time.
struct EnergySummary {
    double energy_j = 0;
    double avg_power_w = 0;
    double duration_s = 0;
};

EnergySummary ingest_energy_trace(const std::string& path,
                                  std::optional<std::pair<double, double>> window = {});

// ---- Subscriber ----

struct SubscribeConfig {
    net::TransportConfig transport;
    std::string topic = "aoi";
    int idle_timeout_ms = 10000;  // stop after this long without a message
    uint64_t stop_after = 0;      // stop once this many records arrive (0 = never)
};

struct SubscribeResult {
    aoi::TimestampLog log;
    uint64_t rejected = 0;  // payloads too short to carry gen_ns/seq
    bool failed = false;
    std::string failure;
};

// Blocking: subscribe, collect until stop_after/idle timeout/stream end.
SubscribeResult subscribe_collect(const SubscribeConfig& cfg);

// Concurrent form used by the orchestrator: start() returns once the
// subscription is acknowledged, so publishing can begin without races.
class Collector {
  public:
    explicit Collector(SubscribeConfig cfg);
    ~Collector();
    void start();
    // Waits until n records arrived or the deadline passes.
    bool wait_for_count(uint64_t n, int timeout_ms);
    SubscribeResult stop();

  private:
    friend SubscribeResult subscribe_collect(const SubscribeConfig& cfg);
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// ---- Experiments ----

struct Impairment {
    double one_way_delay_ms = 0;
    std::optional<int64_t> rate_limit_bps;
    size_t stage_limit_bytes = 65536;
};

struct ExperimentConfig {
    std::string label;
    client::StreamConfig stream;  // transport.host/port are filled in by the harness
    Impairment impair;
    int repetitions = 1;
    std::string output_dir;     // "" = keep logs in memory only
    std::string energy_trace;   // optional power trace for this configuration
    double wallclock_budget_s = 0;  // 0 = uncapped; else repetitions x window must fit
};

struct RunMetrics {
    double mean_aoi_ms = 0;
    double median_aoi_ms = 0;
    double peak_aoi_ms = 0;
    double real_rate = 0;
    double generation_rate = 0;
    uint64_t dropped = 0;
    std::optional<double> avg_power_w;
};

struct Repetition {
    RunMetrics metrics;
    aoi::TimestampLog log;
    std::vector<client::PublishRecord> publish_log;
    mq::QueueCounters queue;
    net::TransportCounters transport;
    int attempts = 1;
    bool failed = false;
    std::string failure;
};

struct Aggregate {
    RunMetrics median;
    RunMetrics p25;
    RunMetrics p75;
};

struct ExperimentResult {
    std::string label;
    std::vector<Repetition> repetitions;
    Aggregate aggregate;
    bool failed = false;  // any repetition exhausted its attempts
};

// Shared infrastructure — broker + impairment proxy — reused across the cells
// of a grid so ports and certificates are set up once.
class Lab {
  public:
    explicit Lab(net::TransportKind kind);
    ~Lab();

    ExperimentResult run(const ExperimentConfig& cfg);

    net::TransportKind kind() const;
    // Proxy matching cfg impairments (restarted when they change).
    uint16_t broker_port(net::TransportKind kind) const;
    const std::string& ca_pem() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// One-shot convenience over Lab.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// ---- Grids & reports ----

// Line-oriented key=value, '#' comments, comma-separated lists expand to the
// Cartesian product. Returns one ExperimentConfig per combination with a
// deterministic label.
std::vector<ExperimentConfig> parse_grid(const std::string& path);
std::vector<ExperimentConfig> parse_grid_text(const std::string& text);

// Writes <dir>/report.json and <dir>/report.csv plus raw logs; deterministic
// field ordering so identical results serialize identically.
void emit_report(const std::vector<ExperimentResult>& results, const std::string& dir);

}  // namespace aoibench::harness
