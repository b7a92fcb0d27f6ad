#include "aoibench/aoi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

namespace aoibench::aoi {

TimestampLog dedupe(const TimestampLog& log) {
    TimestampLog sorted = log;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.rx_ns < b.rx_ns; });
    TimestampLog out;
    out.reserve(sorted.size());
    std::unordered_set<uint64_t> seen;
    for (const auto& r : sorted) {
        if (seen.insert(r.seq).second) out.push_back(r);
    }
    return out;
}

AoiFunction build_sawtooth(const TimestampLog& log) {
    TimestampLog records = dedupe(log);
    if (records.empty()) throw AoiError("empty timestamp log");
    for (const auto& r : records) {
        if (r.rx_ns < r.gen_ns) throw AoiError("reception precedes generation");
    }

    AoiFunction f;
    f.domain_start = records.front().rx_ns;
    f.domain_end = records.back().rx_ns;
    f.segments.reserve(records.size() - 1);

    // U(t) is the maximum generation timestamp among messages received by t,
    // so a stale reception leaves the curve on its current ramp.
    int64_t newest_gen = records.front().gen_ns;
    for (size_t i = 0; i + 1 < records.size(); ++i) {
        const auto& cur = records[i];
        const auto& next = records[i + 1];
        if (i > 0) newest_gen = std::max(newest_gen, cur.gen_ns);
        f.segments.push_back(Segment{cur.rx_ns, cur.rx_ns - newest_gen, next.rx_ns});
    }
    newest_gen = std::max(newest_gen, records.back().gen_ns);
    f.final_age = records.back().rx_ns - newest_gen;
    return f;
}

int64_t evaluate(const AoiFunction& f, int64_t t_ns) {
    if (t_ns < f.domain_start) throw AoiError("instant before the function domain");
    if (t_ns >= f.domain_end) return f.final_age + (t_ns - f.domain_end);

    // Rightmost segment with t_start <= t.
    auto it = std::upper_bound(f.segments.begin(), f.segments.end(), t_ns,
                               [](int64_t t, const Segment& s) { return t < s.t_start; });
    const Segment& s = *std::prev(it);
    return s.aoi_start + (t_ns - s.t_start);
}

namespace {

void require_domain(const AoiFunction& f) {
    if (f.degenerate()) throw AoiError("degenerate domain");
}

long double fraction_below_ld(const AoiFunction& f, long double m) {
    long double covered = 0;
    for (const auto& s : f.segments) {
        long double below = m - static_cast<long double>(s.aoi_start);
        if (below <= 0) continue;
        covered += std::min(below, static_cast<long double>(s.length()));
    }
    return covered / static_cast<long double>(f.domain_length());
}

}  // namespace

double integral_mean(const AoiFunction& f) {
    require_domain(f);
    long double area_rt = 0;   // rectangle + triangle per segment
    long double area_mid = 0;  // midpoint-height rectangle per segment
    for (const auto& s : f.segments) {
        long double len = static_cast<long double>(s.length());
        long double a0 = static_cast<long double>(s.aoi_start);
        area_rt += len * a0 + len * len / 2.0L;
        area_mid += len * (a0 + len / 2.0L);
    }
    long double total = static_cast<long double>(f.domain_length());
    long double mean_rt = area_rt / total;
    long double mean_mid = area_mid / total;
    long double scale = std::max({std::fabs(mean_rt), std::fabs(mean_mid), 1.0L});
    if (std::fabs(mean_rt - mean_mid) / scale > 1e-9L)
        throw AoiError("area methods disagree");
    return static_cast<double>(mean_rt);
}

double projection_median(const AoiFunction& f) {
    require_domain(f);

    // Project each segment's AoI interval onto the value axis: +1 opens a
    // projection, -1 closes it. Zero-length segments contribute nothing.
    std::vector<std::pair<int64_t, int>> events;
    events.reserve(f.segments.size() * 2);
    long double extension = 0;
    for (const auto& s : f.segments) {
        if (s.length() == 0) continue;
        events.emplace_back(s.aoi_start, +1);
        events.emplace_back(s.aoi_end(), -1);
        extension += static_cast<long double>(s.length());
    }
    std::sort(events.begin(), events.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    // Walk the weighted regions bottom-up until half the total extension is
    // covered, then advance into the terminating region by the residual
    // divided by the region weight.
    long double half = extension / 2.0L;
    long double curr_ext = 0;
    long long weight = 0;
    long double start = 0;
    bool started = false;
    for (const auto& [coord, delta] : events) {
        if (started && weight > 0) {
            long double region = static_cast<long double>(coord) - start;
            if (curr_ext + region * weight >= half)
                return static_cast<double>(start + (half - curr_ext) / weight);
            curr_ext += region * weight;
        }
        weight += delta;
        start = static_cast<long double>(coord);
        started = true;
    }
    // Rounding can leave a sliver; the median is then the top of the walk.
    return static_cast<double>(start);
}

double fraction_below(const AoiFunction& f, double m_ns) {
    require_domain(f);
    return static_cast<double>(fraction_below_ld(f, m_ns));
}

double bisection_median(const AoiFunction& f, double tol_ns) {
    require_domain(f);
    if (tol_ns <= 0) throw AoiError("tolerance must be positive");

    long double lo = 0, hi = 0;
    bool first = true;
    for (const auto& s : f.segments) {
        if (s.length() == 0) continue;
        long double a = static_cast<long double>(s.aoi_start);
        long double b = static_cast<long double>(s.aoi_end());
        if (first) {
            lo = a;
            hi = b;
            first = false;
        } else {
            lo = std::min(lo, a);
            hi = std::max(hi, b);
        }
    }
    if (first) throw AoiError("degenerate domain");

    // The function's value coverage is a single interval and fraction_below
    // is strictly increasing on it, so the bracket always converges.
    while (hi - lo > static_cast<long double>(tol_ns)) {
        long double mid = (lo + hi) / 2.0L;
        if (fraction_below_ld(f, mid) >= 0.5L)
            hi = mid;
        else
            lo = mid;
    }
    return static_cast<double>((lo + hi) / 2.0L);
}

int64_t peak_aoi(const AoiFunction& f) {
    if (f.segments.empty()) throw AoiError("degenerate domain");
    int64_t peak = 0;
    for (const auto& s : f.segments) peak = std::max(peak, s.aoi_end());
    return peak;
}

double real_rate(const TimestampLog& log) {
    if (log.size() < 2) throw AoiError("need at least two records for a rate");
    int64_t span = log.back().rx_ns - log.front().rx_ns;
    if (span <= 0) throw AoiError("zero reception span");
    return static_cast<double>(log.size() - 1) * 1e9 / static_cast<double>(span);
}

void write_log_csv(const TimestampLog& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw AoiError("cannot open " + path);
    out << "seq,gen_ns,rx_ns\n";
    for (const auto& r : log)
        out << r.seq << ',' << r.gen_ns << ',' << r.rx_ns << '\n';
}

TimestampLog read_log_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw AoiError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("seq,gen_ns,rx_ns", 0) != 0)
        throw AoiError("bad timestamp log header in " + path);
    TimestampLog log;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        TimestampRecord r;
        if (std::sscanf(line.c_str(), "%lu,%ld,%ld", &r.seq, &r.gen_ns, &r.rx_ns) != 3)
            throw AoiError("bad timestamp log line: " + line);
        log.push_back(r);
    }
    return log;
}

}  // namespace aoibench::aoi
