#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aoibench::pareto {

struct PercentileBand {
    double aoi_p25 = 0;
    double aoi_p75 = 0;
    double power_p25 = 0;
    double power_p75 = 0;
    bool operator==(const PercentileBand&) const = default;
};

// One configuration's (median AoI, average power), both minimized.
struct ParetoPoint {
    std::string label;
    double aoi_ms = 0;
    double power_w = 0;
    std::optional<PercentileBand> band;
    bool operator==(const ParetoPoint&) const = default;
};

// Weak dominance with at least one strict inequality; incomparable ties and
// duplicate coordinates are all retained. Result sorted by aoi ascending.
std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& points);

// Linear interpolation between closest ranks: rank = p/100 * (n-1) on the
// sorted list.
double percentile(std::vector<double> values, double p);

// Front over the union of the inputs; provenance labels are preserved.
std::vector<ParetoPoint> merge_fronts(const std::vector<std::vector<ParetoPoint>>& fronts);

// CSV schema: label,aoi_ms,power_w,aoi_p25,aoi_p75,power_p25,power_p75,on_front
// (band columns empty when absent).
void write_front_csv(const std::vector<ParetoPoint>& all_points,
                     const std::vector<ParetoPoint>& front, const std::string& path);

std::vector<ParetoPoint> read_points_csv(const std::string& path);

}  // namespace aoibench::pareto
