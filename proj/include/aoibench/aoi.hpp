#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace aoibench::aoi {

struct TimestampRecord {
    uint64_t seq = 0;
    int64_t gen_ns = 0;
    int64_t rx_ns = 0;
    bool operator==(const TimestampRecord&) const = default;
};

// Per-message reception records ordered by rx timestamp; the raw AoI input.
using TimestampLog = std::vector<TimestampRecord>;

class AoiError : public std::runtime_error {
  public:
    explicit AoiError(const std::string& what) : std::runtime_error(what) {}
};

// One unit-slope rise of the sawtooth between two consecutive receptions.
// AoI runs from aoi_start at t_start to aoi_start + (t_end - t_start) at t_end.
struct Segment {
    int64_t t_start = 0;
    int64_t aoi_start = 0;
    int64_t t_end = 0;

    int64_t length() const { return t_end - t_start; }
    int64_t aoi_end() const { return aoi_start + length(); }
};

// The exact piecewise-linear AoI function over [first rx, last rx].
// final_age is the AoI at the right edge of the domain (used to extend the
// function past the last reception, where the age keeps rising).
struct AoiFunction {
    std::vector<Segment> segments;
    int64_t domain_start = 0;
    int64_t domain_end = 0;
    int64_t final_age = 0;

    int64_t domain_length() const { return domain_end - domain_start; }
    bool degenerate() const { return domain_length() <= 0; }
};

// Builds the sawtooth from a reception log. Duplicate sequence numbers are
// dropped keeping the earliest reception; a reception carrying a generation
// timestamp older than the current maximum produces no drop in the curve.
AoiFunction build_sawtooth(const TimestampLog& log);

// Evaluates t - U(t). Accepts any t >= domain start; past the last reception
// the age keeps rising along the final ray.
int64_t evaluate(const AoiFunction& f, int64_t t_ns);

// Time-average of the function over its domain, in nanoseconds. Computed with
// both area decompositions (rectangle+triangle, and midpoint rectangle) and
// checked for agreement to 1e-9 relative.
double integral_mean(const AoiFunction& f);

// Exact median: the value m with measure{t : aoi(t) <= m} = half the domain.
// Closed form via projection of the segments onto the value axis.
double projection_median(const AoiFunction& f);

// Iterative median used as the independent oracle for projection_median.
// The result is within tol_ns of the exact value on the value axis.
double bisection_median(const AoiFunction& f, double tol_ns);

// measure{t : aoi(t) <= m} / domain length, in [0,1].
double fraction_below(const AoiFunction& f, double m_ns);

// Maximum of the function over its domain.
int64_t peak_aoi(const AoiFunction& f);

// (n-1) / (rx_last - rx_first), in messages per second. Needs >= 2 records.
double real_rate(const TimestampLog& log);

// Removes duplicate sequence numbers keeping the earliest reception, and
// returns the log sorted by rx timestamp.
TimestampLog dedupe(const TimestampLog& log);

// TimestampLog CSV: header "seq,gen_ns,rx_ns", one record per line.
void write_log_csv(const TimestampLog& log, const std::string& path);
TimestampLog read_log_csv(const std::string& path);

}  // namespace aoibench::aoi
