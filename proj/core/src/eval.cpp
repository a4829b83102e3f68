#include "dagpo/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "dagpo/errors.hpp"

namespace dagpo {

namespace {

bool crosses(const Sample& s, double threshold, const std::string& dataset_id) {
    auto it = s.metrics.find(dataset_id);
    return it != s.metrics.end() && it->second >= threshold;
}

// a dominates b: componentwise >= with at least one strict.
bool dominates(const std::vector<double>& a, const std::vector<double>& b) {
    bool strict = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return false;
        if (a[i] > b[i]) strict = true;
    }
    return strict;
}

// Non-dominated, deduplicated points shifted so the reference is the origin.
std::vector<std::vector<double>> clean_front(const ParetoFront& front) {
    const std::size_t dim = front.reference.size();
    std::vector<std::vector<double>> pts;
    for (const auto& p : front.points) {
        if (p.size() != dim)
            throw DimensionMismatch("hypervolume: point dimension does not match reference");
        std::vector<double> q(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            q[i] = p[i] - front.reference[i];
            if (q[i] < 0.0) throw RangeError("hypervolume: point below reference");
        }
        pts.push_back(std::move(q));
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    std::vector<std::vector<double>> kept;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < pts.size() && !dominated; ++j)
            dominated = j != i && dominates(pts[j], pts[i]);
        if (!dominated) kept.push_back(pts[i]);
    }
    return kept;
}

// 2-D union-of-boxes area against the origin, by descending-x sweep.
double area2(std::vector<std::array<double, 2>> pts) {
    std::sort(pts.begin(), pts.end(),
              [](const auto& a, const auto& b) { return a[0] > b[0]; });
    double area = 0.0;
    double covered_y = 0.0;
    for (const auto& p : pts) {
        if (p[1] > covered_y) {
            area += p[0] * (p[1] - covered_y);
            covered_y = p[1];
        }
    }
    return area;
}

} // namespace

double crossing_rate(const SampleSet& s, double threshold, const std::string& dataset_id) {
    if (s.samples.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& sample : s.samples) hits += crosses(sample, threshold, dataset_id);
    return static_cast<double>(hits) / static_cast<double>(s.samples.size());
}

double bootstrap_extreme(std::span<const double> pool, int batch, int resamples,
                         ExtremeMode mode, RngStream& rng) {
    if (pool.empty()) throw EmptyPool("bootstrap_extreme: empty pool");
    if (batch < 1) throw RangeError("bootstrap_extreme: batch must be >= 1");
    if (resamples < 1) throw RangeError("bootstrap_extreme: resamples must be >= 1");
    const int hi = static_cast<int>(pool.size()) - 1;
    double sum = 0.0;
    for (int r = 0; r < resamples; ++r) {
        double extreme = pool[static_cast<std::size_t>(rng.uniform_int(0, hi))];
        for (int i = 1; i < batch; ++i) {
            double v = pool[static_cast<std::size_t>(rng.uniform_int(0, hi))];
            extreme = mode == ExtremeMode::max ? std::max(extreme, v) : std::min(extreme, v);
        }
        sum += extreme;
    }
    return sum / static_cast<double>(resamples);
}

double ood_lift(const SampleSet& s, double threshold, const std::string& dataset_id,
                double top_fraction) {
    if (!(top_fraction > 0.0 && top_fraction <= 1.0))
        throw RangeError("ood_lift: top_fraction must be in (0, 1]");
    const std::size_t n = s.samples.size();
    if (n == 0) return 0.0;

    double overall = crossing_rate(s, threshold, dataset_id);
    if (overall == 0.0) return 0.0;

    // Rank by the metric, missing values last; ties broken by index for
    // determinism.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto score = [&](std::size_t i) {
        auto it = s.samples[i].metrics.find(dataset_id);
        return it == s.samples[i].metrics.end() ? -std::numeric_limits<double>::infinity()
                                                : it->second;
    };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        double sa = score(a), sb = score(b);
        return sa != sb ? sa > sb : a < b;
    });

    auto top = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(top_fraction * static_cast<double>(n) + 1e-9)));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < top; ++i)
        hits += crosses(s.samples[order[i]], threshold, dataset_id);
    double top_rate = static_cast<double>(hits) / static_cast<double>(top);
    return top_rate / overall - 1.0;
}

double hypervolume(const ParetoFront& front) {
    const std::size_t dim = front.reference.size();
    if (dim == 0 || dim > 3)
        throw DimensionUnsupported("hypervolume: supports 1 to 3 objectives");
    auto pts = clean_front(front);
    if (pts.empty()) return 0.0;

    if (dim == 1) {
        double best = 0.0;
        for (const auto& p : pts) best = std::max(best, p[0]);
        return best;
    }
    if (dim == 2) {
        std::vector<std::array<double, 2>> flat;
        for (const auto& p : pts) flat.push_back({p[0], p[1]});
        return area2(std::move(flat));
    }

    // 3-D: slice along z; within a slab [a, b) exactly the points with z >= b
    // cover it, each over its xy-box.
    std::set<double> zs{0.0};
    for (const auto& p : pts) zs.insert(p[2]);
    std::vector<double> z(zs.begin(), zs.end());
    double volume = 0.0;
    for (std::size_t i = 0; i + 1 < z.size(); ++i) {
        double lo = z[i], hi = z[i + 1];
        std::vector<std::array<double, 2>> slab;
        for (const auto& p : pts)
            if (p[2] >= hi) slab.push_back({p[0], p[1]});
        volume += area2(std::move(slab)) * (hi - lo);
    }
    return volume;
}

ParetoFront pareto_extract(const SampleSet& s, const std::vector<std::string>& dataset_ids) {
    if (dataset_ids.empty()) throw RangeError("pareto_extract: no objectives given");
    std::vector<std::vector<double>> pts;
    for (const auto& sample : s.samples) {
        std::vector<double> p;
        p.reserve(dataset_ids.size());
        for (const auto& id : dataset_ids) {
            auto it = sample.metrics.find(id);
            if (it == sample.metrics.end()) break;
            p.push_back(it->second);
        }
        if (p.size() == dataset_ids.size()) pts.push_back(std::move(p));
    }
    if (pts.empty()) throw EmptyPool("pareto_extract: no sample has all requested metrics");

    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    ParetoFront front;
    front.reference.assign(dataset_ids.size(), 0.0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < pts.size() && !dominated; ++j)
            dominated = j != i && dominates(pts[j], pts[i]);
        if (!dominated) front.points.push_back(pts[i]);
    }
    return front;
}

} // namespace dagpo
