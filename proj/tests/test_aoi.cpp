#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <random>

#include "aoibench/aoi.hpp"
#include "doctest.h"

using namespace aoibench::aoi;

namespace {

constexpr int64_t S = 1'000'000'000;  // ns per second

TimestampLog two_record_log() {
    // gen 0 -> rx 0.1s, gen 1s -> rx 1.1s
    return {{0, 0, S / 10}, {1, S, S + S / 10}};
}

// Draws a random sawtooth; rx strictly increasing, delays positive.
TimestampLog random_log(std::mt19937& rng, size_t n) {
    std::uniform_int_distribution<int64_t> gap(1, 2 * S);
    std::uniform_int_distribution<int64_t> delay(1, S);
    TimestampLog log;
    int64_t rx = 0;
    for (size_t i = 0; i < n; ++i) {
        rx += gap(rng);
        int64_t d = delay(rng);
        log.push_back({i, rx - d, rx});
    }
    return log;
}

}  // namespace

TEST_CASE("two-record sawtooth and evaluation") {
    auto f = build_sawtooth(two_record_log());
    REQUIRE(f.segments.size() == 1);
    CHECK(f.segments[0].t_start == S / 10);
    CHECK(f.segments[0].t_end == S + S / 10);
    CHECK(f.segments[0].aoi_start == S / 10);
    CHECK(f.segments[0].aoi_end() == S + S / 10);
    CHECK(f.final_age == S / 10);  // value just after the second reception

    CHECK(evaluate(f, 105 * S / 100) == 105 * S / 100);  // t=1.05 -> 1.05
    CHECK(evaluate(f, 12 * S / 10) == 2 * S / 10);       // t=1.2 -> 0.2 (final ray)
}

TEST_CASE("single record is degenerate and statistics are rejected") {
    auto f = build_sawtooth({{0, 0, S / 10}});
    CHECK(f.degenerate());
    CHECK(evaluate(f, S / 10) == S / 10);
    CHECK_THROWS_AS(integral_mean(f), AoiError);
    CHECK_THROWS_AS(projection_median(f), AoiError);
    CHECK_THROWS_AS(peak_aoi(f), AoiError);
}

TEST_CASE("stale generation timestamps produce no drop") {
    // (0, gen 0, rx 1), (1, gen 0.5, rx 2), (2, gen 2, rx 3) seconds
    TimestampLog log = {{0, 0, S}, {1, S / 2, 2 * S}, {2, 2 * S, 3 * S}};
    auto f = build_sawtooth(log);
    REQUIRE(f.segments.size() == 2);
    // U jumps 0 -> 0.5 at rx 2: drop to 2-0.5 = 1.5
    CHECK(f.segments[1].t_start == 2 * S);
    CHECK(f.segments[1].aoi_start == 3 * S / 2);
    // third reception drops to 3-2 = 1.0
    CHECK(f.final_age == S);

    // if the second gen were older than the current max, no drop happens
    TimestampLog stale = {{0, S / 2, S}, {1, 0, 2 * S}, {2, 2 * S, 3 * S}};
    auto g = build_sawtooth(stale);
    REQUIRE(g.segments.size() == 2);
    CHECK(g.segments[1].aoi_start == g.segments[0].aoi_end());  // segment continues
}

TEST_CASE("build_sawtooth input validation") {
    CHECK_THROWS_AS(build_sawtooth({}), AoiError);
    CHECK_THROWS_AS(build_sawtooth({{0, 10, 5}}), AoiError);  // rx < gen
}

TEST_CASE("integral mean on hand-checked shapes") {
    // symmetric single segment 0 -> 1s over [0,1]
    auto sym = build_sawtooth({{0, 0, 0}, {1, S, S}});
    CHECK(integral_mean(sym) == doctest::Approx(0.5 * S).epsilon(1e-12));

    // two identical segments 0.1 -> 1.1
    auto f = build_sawtooth({{0, 0, S / 10}, {1, S, S + S / 10}, {2, 2 * S, 2 * S + S / 10}});
    CHECK(integral_mean(f) == doctest::Approx(0.6 * S).epsilon(1e-12));

    // {0->1 over [0,1], 0->3 over [1,4]} -> (0.5 + 4.5)/4 = 1.25
    auto g = build_sawtooth({{0, 0, 0}, {1, S, S}, {2, S, 4 * S}});
    CHECK(integral_mean(g) == doctest::Approx(1.25 * S).epsilon(1e-12));
}

TEST_CASE("projection median on hand-checked shapes") {
    auto sym = build_sawtooth({{0, 0, 0}, {1, S, S}});
    CHECK(projection_median(sym) == doctest::Approx(0.5 * S).epsilon(1e-12));

    // overlapping regions: two identical segments 0.1 -> 1.1 give 0.6, and the
    // below-measure at 0.6 is exactly half of T = 2.
    auto f = build_sawtooth({{0, 0, S / 10}, {1, S, S + S / 10}, {2, 2 * S, 2 * S + S / 10}});
    double m = projection_median(f);
    CHECK(m == doctest::Approx(0.6 * S).epsilon(1e-12));
    CHECK(fraction_below(f, m) == doctest::Approx(0.5).epsilon(1e-12));

    auto g = build_sawtooth({{0, 0, 0}, {1, S, S}, {2, S, 4 * S}});
    CHECK(projection_median(g) == doctest::Approx(1.0 * S).epsilon(1e-12));
    CHECK(fraction_below(g, 1.0 * S) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("fraction_below endpoints and hand value") {
    auto g = build_sawtooth({{0, 0, 0}, {1, S, S}, {2, S, 4 * S}});
    CHECK(fraction_below(g, -1) == 0.0);
    CHECK(fraction_below(g, 10 * S) == 1.0);
    CHECK(fraction_below(g, S) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("peak aoi") {
    auto sym = build_sawtooth({{0, 0, 0}, {1, S, S}});
    CHECK(peak_aoi(sym) == S);
    auto g = build_sawtooth({{0, 0, 0}, {1, S, S}, {2, S, 4 * S}});
    CHECK(peak_aoi(g) == 3 * S);
}

TEST_CASE("real rate") {
    TimestampLog log;
    for (int i = 0; i <= 10; ++i) log.push_back({(uint64_t)i, i * S - 1, i * S});
    CHECK(real_rate(log) == doctest::Approx(1.0));
    TimestampLog fast = {{0, 0, 0}, {1, 0, S / 2}, {2, 0, S}};
    CHECK(real_rate(fast) == doctest::Approx(2.0));
    CHECK_THROWS_AS(real_rate({{0, 0, 0}}), AoiError);
}

TEST_CASE("dedupe keeps the earliest reception per sequence") {
    TimestampLog log = {{0, 0, 10}, {1, 5, 20}, {1, 5, 30}, {2, 25, 40}};
    auto d = dedupe(log);
    REQUIRE(d.size() == 3);
    CHECK(d[1].rx_ns == 20);
}

TEST_CASE("median is exact: fraction below within 1e-12 over random logs") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        auto log = random_log(rng, 50);
        auto f = build_sawtooth(log);
        double m = projection_median(f);
        CHECK(std::fabs(fraction_below(f, m) - 0.5) <= 1e-12);
    }
}

TEST_CASE("projection median agrees with the bisection oracle") {
    std::mt19937 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        auto log = random_log(rng, 1000);
        auto f = build_sawtooth(log);
        double exact = projection_median(f);
        double oracle = bisection_median(f, 1e-3);  // 1e-3 ns tolerance
        CHECK(std::fabs(exact - oracle) <= 1.0);    // within 1 ns
    }
}

TEST_CASE("both mean decompositions agree and match sampling") {
    std::mt19937 rng(99);
    auto log = random_log(rng, 2000);
    auto f = build_sawtooth(log);
    double mean = integral_mean(f);  // internally cross-checked to 1e-9 relative

    // 1 kHz arithmetic sampling converges to the integral mean within 1 ms.
    double acc = 0;
    int64_t step = 1'000'000;  // 1 ms
    int64_t count = 0;
    for (int64_t t = f.domain_start; t < f.domain_end; t += step) {
        acc += static_cast<double>(evaluate(f, t));
        ++count;
    }
    double sampled = acc / static_cast<double>(count);
    CHECK(std::fabs(sampled - mean) < 1'000'000.0);  // < 1 ms in ns
}

TEST_CASE("median <= mean on right-skewed peak-injected logs") {
    std::mt19937 rng(5);
    std::uniform_int_distribution<int64_t> jitter(0, S / 100);
    TimestampLog log;
    int64_t rx = 0;
    for (int i = 0; i < 500; ++i) {
        rx += S / 100 + jitter(rng) / 10;
        // every 50th message is held back, injecting an isolated peak
        int64_t d = (i % 50 == 49) ? S : S / 200;
        log.push_back({(uint64_t)i, rx - d, rx});
    }
    auto f = build_sawtooth(log);
    CHECK(projection_median(f) <= integral_mean(f));
}

TEST_CASE("translation invariance and nonnegative minimum") {
    std::mt19937 rng(21);
    auto log = random_log(rng, 300);
    auto f = build_sawtooth(log);
    for (const auto& s : f.segments) CHECK(s.aoi_start >= 0);

    TimestampLog shifted = log;
    for (auto& r : shifted) {
        r.gen_ns += 123456789;
        r.rx_ns += 123456789;
    }
    auto g = build_sawtooth(shifted);
    CHECK(integral_mean(g) == doctest::Approx(integral_mean(f)).epsilon(1e-12));
    CHECK(projection_median(g) == doctest::Approx(projection_median(f)).epsilon(1e-12));
    CHECK(peak_aoi(g) == peak_aoi(f));
}

TEST_CASE("identical rx timestamps are legal zero-length segments") {
    TimestampLog log = {{0, 0, S}, {1, S / 2, S}, {2, S, 2 * S}};
    auto f = build_sawtooth(log);
    double m = projection_median(f);
    CHECK(std::fabs(fraction_below(f, m) - 0.5) <= 1e-12);
}

TEST_CASE("csv round trip") {
    std::mt19937 rng(3);
    auto log = random_log(rng, 64);
    std::string path = "/tmp/aoi_test_log.csv";
    write_log_csv(log, path);
    auto back = read_log_csv(path);
    CHECK(back == log);
    std::remove(path.c_str());
}
