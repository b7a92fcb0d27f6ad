#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cstdio>
#include <random>
#include <set>

#include "aoibench/pareto.hpp"
#include "doctest.h"

using namespace aoibench::pareto;

namespace {

ParetoPoint pt(const std::string& label, double aoi, double power) {
    return {label, aoi, power, std::nullopt};
}

// Independent O(n^2) dominance filter used as the oracle.
std::vector<ParetoPoint> brute_force_front(std::vector<ParetoPoint> points) {
    std::vector<ParetoPoint> out;
    for (const auto& p : points) {
        bool dominated = false;
        for (const auto& q : points) {
            if (q.aoi_ms <= p.aoi_ms && q.power_w <= p.power_w &&
                (q.aoi_ms < p.aoi_ms || q.power_w < p.power_w)) {
                dominated = true;
                break;
            }
        }
        if (!dominated) out.push_back(p);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.aoi_ms != b.aoi_ms ? a.aoi_ms < b.aoi_ms
               : a.power_w != b.power_w ? a.power_w < b.power_w
                                        : a.label < b.label;
    });
    return out;
}

std::multiset<std::string> labels(const std::vector<ParetoPoint>& pts) {
    std::multiset<std::string> s;
    for (const auto& p : pts) s.insert(p.label);
    return s;
}

}  // namespace

TEST_CASE("front on hand-checked sets") {
    CHECK(labels(pareto_front({pt("a", 1, 3)})) == std::multiset<std::string>{"a"});

    auto f = pareto_front({pt("a", 1, 3), pt("b", 2, 2), pt("c", 3, 1), pt("d", 2.5, 2.5)});
    CHECK(labels(f) == std::multiset<std::string>{"a", "b", "c"});
    // sorted by aoi ascending
    CHECK(f[0].aoi_ms <= f[1].aoi_ms);
    CHECK(f[1].aoi_ms <= f[2].aoi_ms);

    CHECK(labels(pareto_front({pt("a", 1, 1), pt("b", 2, 2), pt("c", 3, 3)})) ==
          std::multiset<std::string>{"a"});
}

TEST_CASE("duplicate-coordinate points are all retained") {
    auto f = pareto_front({pt("a", 1, 1), pt("b", 1, 1), pt("c", 2, 2)});
    CHECK(labels(f) == std::multiset<std::string>{"a", "b"});
}

TEST_CASE("oracle equivalence on random instances") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> coord(0, 10);
    std::uniform_int_distribution<int> quant(1, 8);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<ParetoPoint> points;
        size_t n = 1 + static_cast<size_t>(rng() % 60);
        for (size_t i = 0; i < n; ++i) {
            // quantized coordinates force plenty of exact ties
            double a = std::floor(coord(rng) * quant(rng)) / quant(rng) + 0.1;
            double p = std::floor(coord(rng) * quant(rng)) / quant(rng);
            points.push_back(pt("p" + std::to_string(i), a, p));
        }
        auto fast = pareto_front(points);
        auto slow = brute_force_front(points);
        CHECK(labels(fast) == labels(slow));
    }
}

TEST_CASE("idempotence, permutation and affine invariance") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> coord(0.1, 10);
    std::vector<ParetoPoint> points;
    for (size_t i = 0; i < 40; ++i)
        points.push_back(pt("p" + std::to_string(i), coord(rng), coord(rng)));

    auto f = pareto_front(points);
    CHECK(labels(pareto_front(f)) == labels(f));  // idempotent

    auto shuffled = points;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(labels(pareto_front(shuffled)) == labels(f));  // permutation invariant

    auto scaled = points;
    for (auto& p : scaled) {
        p.aoi_ms = 3.5 * p.aoi_ms + 2.0;
        p.power_w = 0.25 * p.power_w + 1.0;
    }
    CHECK(labels(pareto_front(scaled)) == labels(f));  // positive affine invariant
}

TEST_CASE("percentile linear interpolation") {
    CHECK(percentile({1, 2, 3, 4, 5}, 50) == doctest::Approx(3));
    CHECK(percentile({1, 2, 3, 4}, 25) == doctest::Approx(1.75));
    CHECK(percentile({7}, 0) == doctest::Approx(7));
    CHECK(percentile({7}, 100) == doctest::Approx(7));
    CHECK(percentile({4, 1, 3, 2}, 100) == doctest::Approx(4));  // sorts internally
    CHECK_THROWS(percentile({}, 50));
}

TEST_CASE("merge fronts") {
    auto m1 = merge_fronts({{pt("a", 1, 3)}, {pt("b", 2, 2)}});
    CHECK(labels(m1) == std::multiset<std::string>{"a", "b"});

    auto m2 = merge_fronts({{pt("a", 1, 3), pt("b", 3, 1)}, {pt("c", 2, 1.5)}});
    CHECK(labels(m2) == std::multiset<std::string>{"a", "b", "c"});

    std::vector<ParetoPoint> f = {pt("a", 1, 3), pt("b", 3, 1)};
    CHECK(labels(merge_fronts({f, f})) == labels(f));  // idempotence

    // merge result is a subset of the union
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> coord(0.1, 10);
    std::vector<ParetoPoint> x, y;
    for (int i = 0; i < 20; ++i) x.push_back(pt("x" + std::to_string(i), coord(rng), coord(rng)));
    for (int i = 0; i < 20; ++i) y.push_back(pt("y" + std::to_string(i), coord(rng), coord(rng)));
    auto fx = pareto_front(x), fy = pareto_front(y);
    auto merged = merge_fronts({fx, fy});
    auto uni = labels(fx);
    for (auto& l : labels(fy)) uni.insert(l);
    for (const auto& p : merged) CHECK(uni.count(p.label) > 0);
}

TEST_CASE("csv round trip with and without bands") {
    std::vector<ParetoPoint> points = {
        {"cfg1", 10.5, 2.25, PercentileBand{9.0, 12.0, 2.0, 2.5}},
        {"cfg2", 20.0, 1.0, std::nullopt},
        {"cfg3", 5.0, 4.0, PercentileBand{4.5, 5.5, 3.5, 4.5}},
    };
    auto front = pareto_front(points);
    std::string path = "/tmp/pareto_test.csv";
    write_front_csv(points, front, path);
    auto back = read_points_csv(path);
    REQUIRE(back.size() == points.size());
    for (size_t i = 0; i < points.size(); ++i) {
        CHECK(back[i].label == points[i].label);
        CHECK(back[i].aoi_ms == doctest::Approx(points[i].aoi_ms));
        CHECK(back[i].power_w == doctest::Approx(points[i].power_w));
        CHECK(back[i].band.has_value() == points[i].band.has_value());
    }
    std::remove(path.c_str());
}
