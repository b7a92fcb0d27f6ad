#include "aoibench/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace aoibench::pareto {

std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& points) {
    if (points.empty()) return {};

    std::vector<ParetoPoint> sorted = points;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.aoi_ms != b.aoi_ms) return a.aoi_ms < b.aoi_ms;
        return a.power_w < b.power_w;
    });

    // Sweep by ascending aoi: a point survives unless some point with aoi <=
    // its own has power <= its own (one strict). Groups with equal aoi keep
    // every duplicate of their minimum power.
    std::vector<ParetoPoint> front;
    double best_power = std::numeric_limits<double>::infinity();
    size_t i = 0;
    while (i < sorted.size()) {
        size_t j = i;
        while (j < sorted.size() && sorted[j].aoi_ms == sorted[i].aoi_ms) ++j;
        double group_min = sorted[i].power_w;
        for (size_t k = i; k < j; ++k) {
            if (sorted[k].power_w == group_min && sorted[k].power_w < best_power)
                front.push_back(sorted[k]);
        }
        best_power = std::min(best_power, group_min);
        i = j;
    }
    return front;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile of empty list");
    std::sort(values.begin(), values.end());
    double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    double lo = std::floor(rank);
    double hi = std::ceil(rank);
    size_t li = static_cast<size_t>(lo);
    size_t hi_i = static_cast<size_t>(hi);
    if (li == hi_i) return values[li];
    double frac = rank - lo;
    return values[li] * (1.0 - frac) + values[hi_i] * frac;
}

std::vector<ParetoPoint> merge_fronts(const std::vector<std::vector<ParetoPoint>>& fronts) {
    std::vector<ParetoPoint> all;
    for (const auto& f : fronts) {
        for (const auto& p : f) {
            // Exact duplicates across fronts (same configuration contributed
            // twice) collapse, so merging a front with itself is the identity.
            if (std::find(all.begin(), all.end(), p) == all.end()) all.push_back(p);
        }
    }
    return pareto_front(all);
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

}  // namespace

void write_front_csv(const std::vector<ParetoPoint>& all_points,
                     const std::vector<ParetoPoint>& front, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "label,aoi_ms,power_w,aoi_p25,aoi_p75,power_p25,power_p75,on_front\n";
    auto on_front = [&](const ParetoPoint& p) {
        return std::find(front.begin(), front.end(), p) != front.end();
    };
    for (const auto& p : all_points) {
        out << p.label << ',' << fmt(p.aoi_ms) << ',' << fmt(p.power_w) << ',';
        if (p.band) {
            out << fmt(p.band->aoi_p25) << ',' << fmt(p.band->aoi_p75) << ','
                << fmt(p.band->power_p25) << ',' << fmt(p.band->power_p75);
        } else {
            out << ",,,";
        }
        out << ',' << (on_front(p) ? 1 : 0) << '\n';
    }
}

std::vector<ParetoPoint> read_points_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty points file " + path);
    std::vector<ParetoPoint> points;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (fields.size() < 3) throw std::runtime_error("bad points line: " + line);
        ParetoPoint p;
        p.label = fields[0];
        p.aoi_ms = std::stod(fields[1]);
        p.power_w = std::stod(fields[2]);
        if (fields.size() >= 7 && !fields[3].empty()) {
            p.band = PercentileBand{std::stod(fields[3]), std::stod(fields[4]),
                                    std::stod(fields[5]), std::stod(fields[6])};
        }
        points.push_back(p);
    }
    return points;
}

}  // namespace aoibench::pareto
