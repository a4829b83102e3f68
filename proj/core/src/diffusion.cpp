#include "dagpo/diffusion.hpp"

#include <cmath>
#include <numbers>

#include "dagpo/errors.hpp"

namespace dagpo {

namespace {

void check_step(int t, const NoiseSchedule& schedule, const char* who) {
    if (t < 1 || t > schedule.T)
        throw RangeError(std::string(who) + ": timestep must lie in [1, T]");
}

// Shared core of posterior_step_distribution; writes unnormalized weights
// then normalizes in place.
void posterior_step_into(int x_t, std::span<const double> x0_probs, int t,
                         const NoiseSchedule& schedule, std::vector<double>& out) {
    const auto K = x0_probs.size();
    if (K == 0) throw DegenerateDistribution("posterior: empty x0 distribution");
    if (x_t < 0 || static_cast<std::size_t>(x_t) >= K)
        throw RangeError("posterior: x_t category out of range");

    double p_sum = 0.0;
    for (double p : x0_probs) {
        if (!std::isfinite(p) || p < 0.0)
            throw DegenerateDistribution("posterior: x0 probabilities must be finite and non-negative");
        p_sum += p;
    }
    if (p_sum <= 0.0) throw DegenerateDistribution("posterior: x0 probabilities sum to zero");

    const double alpha_t = schedule.alpha(t);
    const double abar_prev = schedule.alpha_bar[static_cast<std::size_t>(t - 1)];
    const double Kd = static_cast<double>(K);

    out.resize(K);
    double z = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
        // Q_t[j -> x_t] times P(chain at j after t-1 steps | x0 ~ x0_probs).
        double step = (static_cast<int>(j) == x_t ? alpha_t : 0.0) + (1.0 - alpha_t) / Kd;
        double occupancy = abar_prev * (x0_probs[j] / p_sum) + (1.0 - abar_prev) / Kd;
        out[j] = step * occupancy;
        z += out[j];
    }
    if (!(z > 0.0) || !std::isfinite(z))
        throw DegenerateDistribution("posterior: normalizer underflowed");
    for (double& w : out) w /= z;
}

} // namespace

double NoiseSchedule::alpha(int t) const {
    check_step(t, *this, "alpha");
    double prev = alpha_bar[static_cast<std::size_t>(t - 1)];
    if (prev <= 0.0) return 0.0;
    return alpha_bar[static_cast<std::size_t>(t)] / prev;
}

double NoiseSchedule::keep_probability(int t, int K) const {
    if (t < 0 || t > T) throw RangeError("keep_probability: timestep must lie in [0, T]");
    if (K < 1) throw RangeError("keep_probability: need at least one category");
    double ab = alpha_bar[static_cast<std::size_t>(t)];
    return ab + (1.0 - ab) / static_cast<double>(K);
}

NoiseSchedule cosine_schedule(int T, double s) {
    if (T < 1) throw RangeError("cosine_schedule: T must be at least 1");
    if (s <= 0.0) throw RangeError("cosine_schedule: offset must be positive");
    NoiseSchedule sch;
    sch.T = T;
    sch.s = s;
    sch.alpha_bar.resize(static_cast<std::size_t>(T) + 1);
    const double half_pi = std::numbers::pi / 2.0;
    auto f = [&](double u) {
        double c = std::cos((u + s) / (1.0 + s) * half_pi);
        return c * c;
    };
    const double norm = f(0.0);
    for (int t = 0; t <= T; ++t)
        sch.alpha_bar[static_cast<std::size_t>(t)] =
            f(static_cast<double>(t) / static_cast<double>(T)) / norm;
    sch.alpha_bar[0] = 1.0;
    return sch;
}

NoisyGraph NoisyGraph::from_dag(const Dag& g, const SpaceSpec& spec, int t) {
    if (g.n != spec.max_nodes)
        throw DimensionMismatch("NoisyGraph: graph size does not match the space");
    NoisyGraph out;
    out.n = g.n;
    out.node_cats = spec.node_cats;
    out.edge_cats = spec.edge_cats;
    out.t = t;
    out.node_cat.resize(static_cast<std::size_t>(g.n));
    for (int i = 0; i < g.n; ++i) {
        int lab = g.node_labels[static_cast<std::size_t>(i)];
        if (lab >= spec.node_cats) throw RangeError("NoisyGraph: node label out of range");
        out.node_cat[static_cast<std::size_t>(i)] = lab;
    }
    out.edge_cat.resize(static_cast<std::size_t>(upper_tri_count(g.n)));
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            int cat = g.edge(i, j);
            if (cat == 0) continue;
            if (j <= i)
                throw DimensionMismatch("NoisyGraph: graph must be canonically ordered");
            if (cat >= spec.edge_cats) throw RangeError("NoisyGraph: edge category out of range");
            out.edge_cat[static_cast<std::size_t>(upper_tri_index(g.n, i, j))] = cat;
        }
    return out;
}

OrderedDag NoisyGraph::to_dag() const {
    std::vector<int> full(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
    for (int k = 0; k < upper_tri_count(n); ++k) {
        auto [i, j] = upper_tri_cell(n, k);
        full[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
             static_cast<std::size_t>(j)] = edge_cat[static_cast<std::size_t>(k)];
    }
    return recover_dag(n, full, node_cat);
}

const NoisyGraph& Trajectory::at_t(int t) const {
    int T = static_cast<int>(intermediates.size());
    if (t < 1 || t > T) throw RangeError("Trajectory::at_t: timestep must lie in [1, T]");
    return intermediates[static_cast<std::size_t>(T - t)];
}

NoisyGraph forward_sample(const OrderedDag& g0, int t, const NoiseSchedule& schedule,
                          const SpaceSpec& spec, RngStream& rng) {
    check_step(t, schedule, "forward_sample");
    NoisyGraph g = NoisyGraph::from_dag(g0, spec, t);

    auto corrupt = [&](int cur, int K) {
        double keep = schedule.keep_probability(t, K);
        if (rng.uniform() < keep || K == 1) return cur;
        // Uniform over the other K-1 categories.
        int pick = rng.uniform_int(0, K - 2);
        return pick >= cur ? pick + 1 : pick;
    };
    for (auto& c : g.node_cat) c = corrupt(c, spec.node_cats);
    for (auto& c : g.edge_cat) c = corrupt(c, spec.edge_cats);
    return g;
}

std::vector<double> posterior_step_distribution(int x_t, std::span<const double> x0_probs,
                                                int t, const NoiseSchedule& schedule) {
    check_step(t, schedule, "posterior_step_distribution");
    std::vector<double> out;
    posterior_step_into(x_t, x0_probs, t, schedule, out);
    return out;
}

Trajectory reverse_generate(const DenoiserFn& denoiser, const NoiseSchedule& schedule,
                            const SpaceSpec& spec, RngStream& rng) {
    const int n = spec.max_nodes;
    const int m = upper_tri_count(n);

    NoisyGraph g;
    g.n = n;
    g.node_cats = spec.node_cats;
    g.edge_cats = spec.edge_cats;
    g.t = schedule.T;
    g.node_cat.resize(static_cast<std::size_t>(n));
    g.edge_cat.resize(static_cast<std::size_t>(m));
    for (auto& c : g.node_cat) c = rng.uniform_int(0, spec.node_cats - 1);
    for (auto& c : g.edge_cat) c = rng.uniform_int(0, spec.edge_cats - 1);

    Trajectory traj;
    traj.intermediates.reserve(static_cast<std::size_t>(schedule.T));
    std::vector<double> weights;
    for (int t = schedule.T; t >= 1; --t) {
        g.t = t;
        traj.intermediates.push_back(g);
        DenoiserOutput out = denoiser(g);
        if (out.n != n || out.node_cats != spec.node_cats || out.edge_cats != spec.edge_cats)
            throw DimensionMismatch("reverse_generate: denoiser output has wrong dimensions");
        for (int i = 0; i < n; ++i) {
            posterior_step_into(g.node_cat[static_cast<std::size_t>(i)], out.node_row(i), t,
                                schedule, weights);
            g.node_cat[static_cast<std::size_t>(i)] = rng.categorical(weights);
        }
        for (int e = 0; e < m; ++e) {
            posterior_step_into(g.edge_cat[static_cast<std::size_t>(e)], out.edge_row(e), t,
                                schedule, weights);
            g.edge_cat[static_cast<std::size_t>(e)] = rng.categorical(weights);
        }
    }
    g.t = 0;
    traj.final = g.to_dag();
    return traj;
}

} // namespace dagpo
