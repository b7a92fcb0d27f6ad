#pragma once

#include <ctime>

#include <chrono>
#include <cstdint>
#include <thread>

namespace aoibench {

// All timestamps in the project are integer nanoseconds on CLOCK_MONOTONIC.
// The monotonic clock is machine-wide on Linux, so publisher and subscriber
// processes on the same host share the epoch.
inline int64_t now_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

inline void sleep_until_ns(int64_t deadline_ns) {
    using namespace std::chrono;
    auto tp = steady_clock::time_point(nanoseconds(deadline_ns));
    std::this_thread::sleep_until(tp);
}

inline void sleep_ns(int64_t dur_ns) {
    if (dur_ns > 0) std::this_thread::sleep_for(std::chrono::nanoseconds(dur_ns));
}

// Kernel sleeps can overshoot by milliseconds under load; pacing loops need
// better. Sleeps on an absolute deadline (so per-period overshoot never
// accumulates), then yields through a short window. The window is kept small:
// high-rate pacing loops call this every period, and a wide spin monopolizes
// a single-core machine.
inline void precise_sleep_until_ns(int64_t deadline_ns) {
    constexpr int64_t kSpinWindowNs = 200'000;
    int64_t coarse = deadline_ns - kSpinWindowNs;
    if (now_ns() < coarse) {
        timespec ts{static_cast<time_t>(coarse / 1'000'000'000),
                    static_cast<long>(coarse % 1'000'000'000)};
        while (clock_nanosleep(CLOCK_MONOTONIC, TIMER_ABSTIME, &ts, nullptr) == EINTR) {
        }
    }
    while (now_ns() < deadline_ns) std::this_thread::yield();
}

constexpr double kNsPerMs = 1e6;
constexpr double kNsPerSec = 1e9;

}  // namespace aoibench
