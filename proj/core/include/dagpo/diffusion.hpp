#pragma once

#include <functional>
#include <span>
#include <vector>

#include "dagpo/dag.hpp"
#include "dagpo/rng.hpp"
#include "dagpo/search_space.hpp"

namespace dagpo {

// Discrete-time noise schedule. alpha_bar[t] is the probability mass kept on
// the original category after corrupting straight from step 0 to step t
// (before the uniform leak is added back); alpha_bar[0] = 1 and the sequence
// decreases to (nearly) zero at t = T.
struct NoiseSchedule {
    int T = 0;
    double s = 0.008;
    std::vector<double> alpha_bar;

    // Per-step retention alpha_t = alpha_bar[t] / alpha_bar[t-1], t in [1, T].
    double alpha(int t) const;

    // Marginal probability that a K-way categorical coordinate still shows its
    // original category at step t: alpha_bar[t] + (1 - alpha_bar[t]) / K.
    double keep_probability(int t, int K) const;
};

// alpha_bar[t] = cos^2(((t/T + s)/(1 + s)) * pi/2), normalized so alpha_bar[0] = 1.
NoiseSchedule cosine_schedule(int T = 800, double s = 0.008);

// Fully factored graph tensor at diffusion step t. Conceptually every node
// slot is a one-hot row over node_cats and every strict-upper-triangle edge
// cell a one-hot row over edge_cats; slots store the hot index. Diagonal and
// lower-triangle cells do not exist here: they are pinned to "no edge".
struct NoisyGraph {
    int n = 0;
    int node_cats = 0;
    int edge_cats = 0;
    int t = 0;
    std::vector<int> node_cat;  // n entries
    std::vector<int> edge_cat;  // upper_tri_count(n) entries, upper_tri_index order

    // Reads the canonical (strictly upper-triangular) graph into slot form.
    // Throws DimensionMismatch if g carries diagonal or lower-triangle edges,
    // RangeError if a category exceeds the space dims.
    static NoisyGraph from_dag(const Dag& g, const SpaceSpec& spec, int t);

    // Assembles the slots into a canonical DAG via recover_dag.
    OrderedDag to_dag() const;

    bool operator==(const NoisyGraph&) const = default;
};

// Predicted clean-graph distributions: one probability row per node slot and
// per upper-triangle edge cell.
struct DenoiserOutput {
    int n = 0;
    int node_cats = 0;
    int edge_cats = 0;
    std::vector<double> node_probs;  // n * node_cats, row-major
    std::vector<double> edge_probs;  // upper_tri_count(n) * edge_cats, row-major

    std::span<const double> node_row(int i) const {
        return {node_probs.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(node_cats),
                static_cast<std::size_t>(node_cats)};
    }
    std::span<const double> edge_row(int cell) const {
        return {edge_probs.data() + static_cast<std::size_t>(cell) * static_cast<std::size_t>(edge_cats),
                static_cast<std::size_t>(edge_cats)};
    }
};

using DenoiserFn = std::function<DenoiserOutput(const NoisyGraph&)>;

// One reverse rollout, kept in full for the policy-gradient loss.
struct Trajectory {
    std::vector<NoisyGraph> intermediates;  // G_T, G_{T-1}, ..., G_1
    OrderedDag final;                       // G_0
    double reward = 0.0;
    double advantage = 0.0;

    // Intermediate at step t, 1 <= t <= T.
    const NoisyGraph& at_t(int t) const;
};

// Corrupts every slot of g0 independently: keep the original category with
// probability alpha_bar[t] + (1 - alpha_bar[t])/K, otherwise resample
// uniformly among the other K-1 categories. Throws RangeError unless
// 1 <= t <= T.
NoisyGraph forward_sample(const OrderedDag& g0, int t, const NoiseSchedule& schedule,
                          const SpaceSpec& spec, RngStream& rng);

// Posterior q(x_{t-1} | x_t, x0 ~ x0_probs) for one K-way slot under the
// uniform kernel: proportional to Q_t[x_{t-1} -> x_t] times the chance that
// the chain sat at x_{t-1} after t-1 steps, marginalized over x0_probs.
// Throws RangeError unless 1 <= t <= T; DegenerateDistribution when the
// normalizer underflows.
std::vector<double> posterior_step_distribution(int x_t, std::span<const double> x0_probs,
                                                int t, const NoiseSchedule& schedule);

// Samples one full reverse trajectory: G_T uniform per slot, then T posterior
// steps guided by the denoiser's predicted clean-graph distributions.
Trajectory reverse_generate(const DenoiserFn& denoiser, const NoiseSchedule& schedule,
                            const SpaceSpec& spec, RngStream& rng);

} // namespace dagpo
