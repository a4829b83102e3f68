#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dagpo/dag.hpp"
#include "dagpo/search_space.hpp"

namespace dagpo {

// Per-dataset metrics (e.g. validation accuracies) keyed by arch key.
struct BenchmarkTable {
    SpaceSpec space;
    std::unordered_map<std::string, std::map<std::string, double>> entries;

    // nullptr when the key has no row.
    const std::map<std::string, double>* find(const std::string& key) const {
        auto it = entries.find(key);
        return it == entries.end() ? nullptr : &it->second;
    }
};

// Loads one JSON object per line: {"key": string, "metrics": {id: acc, ...}}.
// Every key must decode to a valid architecture of `space`; every accuracy
// must lie in [0,1]. Errors carry the offending line number.
BenchmarkTable load_benchmark(const std::string& path, const SpaceSpec& space);

enum class RewardMode { forward, inverse, multi_objective };

// One reward component: a dataset id (or synthetic sub-reward name), its
// weight, and min-max normalization bounds.
struct RewardTerm {
    std::string dataset;
    double weight = 1.0;
    double lo = 0.0;
    double hi = 1.0;
};

struct RewardSpec {
    RewardMode mode = RewardMode::forward;
    std::vector<RewardTerm> terms;

    // Throws RangeError when empty, bounds are degenerate, or multi_objective
    // has fewer than two nonzero weights.
    void check() const;

    static RewardSpec single(const std::string& dataset, RewardMode mode = RewardMode::forward);
};

// Weighted normalized table lookup: sum_i w_i * clip((acc_i - lo_i)/(hi_i - lo_i), 0, 1),
// negated in inverse mode. Total: a graph with no table row, one that is not
// a valid architecture, or a row lacking a requested dataset scores 0.
double tabular_reward(const BenchmarkTable& table, const Dag& g, const RewardSpec& spec);

// Structural oracle in [0,1]:
//   0.5 * longest_path_edges/(n-1) + 0.5 * (category-1 edge count)/max_edges,
// 0 for n = 1. Invariant under node reordering. Requires an acyclic graph.
double synthetic_reward(const Dag& g);

// Sub-reward names usable in a RewardSpec for the synthetic oracle.
inline constexpr const char* kSyntheticComposite = "synthetic";
inline constexpr const char* kSyntheticDepth = "depth";      // longest-path term
inline constexpr const char* kSyntheticPreference = "pref";  // category-1 density term

// Running reward statistics for advantage normalization: exponential moving
// average over batch means / batch population stds, decay 0.99. The first
// batch seeds both statistics exactly, so a batch of identical rewards always
// normalizes to zero advantage.
class RewardStats {
public:
    static constexpr double kDecay = 0.99;
    static constexpr double kStdFloor = 1e-6;

    // Throws EmptyPool on an empty batch, RangeError on non-finite rewards.
    void update_batch(std::span<const double> rewards);

    double mean() const { return mean_; }
    double stddev() const { return std_; }
    long count() const { return count_; }

private:
    double mean_ = 0.0;
    double std_ = 1.0;
    long count_ = 0;
};

// A = clip((r - mean)/std, -5, 5).
double advantage(double reward, const RewardStats& stats);

// A reward oracle bundles the scalar training signal with named per-dataset
// measurements for evaluation. Both callables are pure and thread-safe.
struct RewardOracle {
    std::function<double(const Dag&)> reward;
    std::function<std::map<std::string, double>(const Dag&)> metrics;
};

// Table-backed oracle. The table must outlive the oracle.
RewardOracle make_tabular_oracle(const BenchmarkTable& table, RewardSpec spec);

// Self-contained synthetic oracle. The default spec is the composite score;
// terms may also reference the "depth" and "pref" sub-rewards (e.g. for
// multi-objective runs). Metrics always report all three.
RewardOracle make_synthetic_oracle(RewardSpec spec = RewardSpec::single(kSyntheticComposite));

} // namespace dagpo
