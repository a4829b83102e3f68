#include "dagpo/reward.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "dagpo/errors.hpp"
#include "dagpo/io.hpp"

namespace dagpo {

namespace {

double clip01(double x) { return std::clamp(x, 0.0, 1.0); }

// Combined weighted normalized score over the spec's terms; lookup maps a
// dataset id to its raw metric, returning false when unavailable.
template <typename Lookup>
double combine(const RewardSpec& spec, Lookup&& lookup) {
    spec.check();
    double total = 0.0;
    for (const auto& term : spec.terms) {
        double raw = 0.0;
        if (!lookup(term.dataset, raw)) return 0.0;
        total += term.weight * clip01((raw - term.lo) / (term.hi - term.lo));
    }
    return spec.mode == RewardMode::inverse ? -total : total;
}

} // namespace

BenchmarkTable load_benchmark(const std::string& path, const SpaceSpec& space) {
    BenchmarkTable table;
    table.space = space;
    auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string where = path + ":" + std::to_string(i + 1);
        if (lines[i].empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(lines[i]);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(where + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("key") || !j["key"].is_string() ||
            !j.contains("metrics") || !j["metrics"].is_object())
            throw ParseError(where + ": need {\"key\": string, \"metrics\": object}");
        std::string key = j["key"].get<std::string>();
        try {
            arch_key_to_dag(key, space);
        } catch (const Error& e) {
            throw KeyError(where + ": " + e.what());
        }
        std::map<std::string, double> metrics;
        for (const auto& [id, val] : j["metrics"].items()) {
            if (!val.is_number())
                throw ParseError(where + ": metric '" + id + "' is not a number");
            double acc = val.get<double>();
            if (!(acc >= 0.0 && acc <= 1.0))
                throw RangeError(where + ": metric '" + id + "' outside [0,1]");
            metrics[id] = acc;
        }
        table.entries[std::move(key)] = std::move(metrics);
    }
    return table;
}

void RewardSpec::check() const {
    if (terms.empty()) throw RangeError("reward spec has no terms");
    int nonzero = 0;
    for (const auto& t : terms) {
        if (!(t.hi > t.lo)) throw RangeError("reward term '" + t.dataset + "' has hi <= lo");
        if (t.weight != 0.0) ++nonzero;
    }
    if (mode == RewardMode::multi_objective && nonzero < 2)
        throw RangeError("multi-objective reward needs at least two nonzero weights");
}

RewardSpec RewardSpec::single(const std::string& dataset, RewardMode mode) {
    RewardSpec spec;
    spec.mode = mode;
    spec.terms.push_back(RewardTerm{dataset, 1.0, 0.0, 1.0});
    return spec;
}

double tabular_reward(const BenchmarkTable& table, const Dag& g, const RewardSpec& spec) {
    std::string key;
    try {
        key = arch_key(g, table.space);
    } catch (const InvalidArchitecture&) {
        return 0.0;
    }
    const auto* metrics = table.find(key);
    if (metrics == nullptr) return 0.0;
    return combine(spec, [&](const std::string& id, double& out) {
        auto it = metrics->find(id);
        if (it == metrics->end()) return false;
        out = it->second;
        return true;
    });
}

namespace {

// Longest path (in edges) and category-1 edge count, order-invariant.
void synthetic_features(const Dag& g, double& depth01, double& pref01) {
    OrderedDag c = topological_order(g);
    std::vector<int> dist(static_cast<std::size_t>(c.n), 0);
    int longest = 0;
    int cat1 = 0;
    for (int j = 0; j < c.n; ++j) {
        for (int i = 0; i < j; ++i)
            if (c.edge(i, j) != 0)
                dist[static_cast<std::size_t>(j)] = std::max(
                    dist[static_cast<std::size_t>(j)], dist[static_cast<std::size_t>(i)] + 1);
        longest = std::max(longest, dist[static_cast<std::size_t>(j)]);
    }
    for (int v : c.edges) cat1 += (v == 1);
    if (c.n <= 1) {
        depth01 = 0.0;
        pref01 = 0.0;
        return;
    }
    depth01 = static_cast<double>(longest) / static_cast<double>(c.n - 1);
    pref01 = static_cast<double>(cat1) / static_cast<double>(upper_tri_count(c.n));
}

} // namespace

double synthetic_reward(const Dag& g) {
    double depth01 = 0.0, pref01 = 0.0;
    synthetic_features(g, depth01, pref01);
    return 0.5 * depth01 + 0.5 * pref01;
}

void RewardStats::update_batch(std::span<const double> rewards) {
    if (rewards.empty()) throw EmptyPool("RewardStats: empty batch");
    for (double r : rewards) {
        if (!std::isfinite(r)) throw RangeError("RewardStats: non-finite reward");
    }
    // Shifted mean so a batch of identical values yields that value exactly,
    // which makes the advantages of a constant batch exactly zero.
    const double shift = rewards.front();
    double dev_sum = 0.0;
    for (double r : rewards) dev_sum += r - shift;
    double batch_mean = shift + dev_sum / static_cast<double>(rewards.size());
    double sq = 0.0;
    for (double r : rewards) sq += (r - batch_mean) * (r - batch_mean);
    double batch_std = std::sqrt(sq / static_cast<double>(rewards.size()));

    if (count_ == 0) {
        mean_ = batch_mean;
        std_ = batch_std;
    } else {
        // Incremental EMA form: exact fixed point when the batch repeats the
        // running statistics.
        mean_ += (1.0 - kDecay) * (batch_mean - mean_);
        std_ += (1.0 - kDecay) * (batch_std - std_);
    }
    std_ = std::max(std_, kStdFloor);
    count_ += static_cast<long>(rewards.size());
}

double advantage(double reward, const RewardStats& stats) {
    return std::clamp((reward - stats.mean()) / stats.stddev(), -5.0, 5.0);
}

RewardOracle make_tabular_oracle(const BenchmarkTable& table, RewardSpec spec) {
    spec.check();
    const BenchmarkTable* t = &table;
    RewardOracle oracle;
    oracle.reward = [t, spec](const Dag& g) { return tabular_reward(*t, g, spec); };
    oracle.metrics = [t](const Dag& g) -> std::map<std::string, double> {
        std::string key;
        try {
            key = arch_key(g, t->space);
        } catch (const InvalidArchitecture&) {
            return {};
        }
        const auto* m = t->find(key);
        return m == nullptr ? std::map<std::string, double>{} : *m;
    };
    return oracle;
}

RewardOracle make_synthetic_oracle(RewardSpec spec) {
    spec.check();
    RewardOracle oracle;
    oracle.reward = [spec](const Dag& g) {
        double depth01 = 0.0, pref01 = 0.0;
        synthetic_features(g, depth01, pref01);
        return combine(spec, [&](const std::string& id, double& out) {
            if (id == kSyntheticDepth) out = depth01;
            else if (id == kSyntheticPreference) out = pref01;
            else if (id == kSyntheticComposite) out = 0.5 * depth01 + 0.5 * pref01;
            else return false;
            return true;
        });
    };
    oracle.metrics = [](const Dag& g) {
        double depth01 = 0.0, pref01 = 0.0;
        synthetic_features(g, depth01, pref01);
        return std::map<std::string, double>{{kSyntheticDepth, depth01},
                                             {kSyntheticPreference, pref01},
                                             {kSyntheticComposite, 0.5 * depth01 + 0.5 * pref01}};
    };
    return oracle;
}

} // namespace dagpo
