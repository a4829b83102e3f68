#pragma once

#include <cstddef>
#include <vector>

#include "dagpo/dag.hpp"
#include "dagpo/diffusion.hpp"
#include "dagpo/rng.hpp"
#include "dagpo/search_space.hpp"

namespace dagpo {

// Shape of the dense denoising network. The input vector concatenates
// [node one-hots | per-node positional encodings | upper-triangle edge
// one-hots | t/T], flattened in that order.
struct DenoiserDims {
    int n = 0;
    int node_cats = 0;
    int edge_cats = 0;
    int pe_dim = 8;
    int hidden = 256;
    int hidden_layers = 4;

    int upper_cells() const { return upper_tri_count(n); }
    int input_width() const {
        return n * node_cats + n * pe_dim + upper_cells() * edge_cats + 1;
    }
    int node_out() const { return n * node_cats; }
    int edge_out() const { return upper_cells() * edge_cats; }

    static DenoiserDims for_space(const SpaceSpec& spec, int pe_dim = 8, int hidden = 256,
                                  int hidden_layers = 4);

    bool operator==(const DenoiserDims&) const = default;
};

struct DenseLayer {
    int in = 0;
    int out = 0;
    std::vector<double> W;  // out x in, row-major
    std::vector<double> b;  // out
    bool frozen = false;

    std::size_t param_count() const { return W.size() + b.size(); }

    bool operator==(const DenseLayer&) const = default;
};

// Network parameters. layers holds the L hidden layers first, then the node
// head, then the edge head; freezing always takes a prefix of this order.
struct DenoiserParams {
    DenoiserDims dims;
    int T = 0;  // timestep normalizer for the t/T input feature
    std::vector<DenseLayer> layers;

    DenseLayer& node_head() { return layers[static_cast<std::size_t>(dims.hidden_layers)]; }
    const DenseLayer& node_head() const { return layers[static_cast<std::size_t>(dims.hidden_layers)]; }
    DenseLayer& edge_head() { return layers[static_cast<std::size_t>(dims.hidden_layers) + 1]; }
    const DenseLayer& edge_head() const { return layers[static_cast<std::size_t>(dims.hidden_layers) + 1]; }

    std::size_t param_count() const;
    std::size_t frozen_param_count() const;
    double frozen_fraction() const;

    // Kaiming-uniform hidden weights, zero hidden biases, zero heads (so an
    // untrained network predicts uniform distributions). Deterministic in rng.
    static DenoiserParams init(const DenoiserDims& dims, int T, RngStream& rng);

    bool operator==(const DenoiserParams&) const = default;
};

// Per-layer gradient tensors, same shapes as the parameters.
struct Gradients {
    std::vector<std::vector<double>> gW;
    std::vector<std::vector<double>> gb;

    static Gradients zeros_like(const DenoiserParams& params);
    void add(const Gradients& other);    // elementwise, shapes must match
    void scale(double factor);
    double max_abs() const;
};

// Runs the network. Output rows are softmaxes floored at 1e-12 and
// renormalized, so every entry is strictly positive and safe to sample.
// Throws DimensionMismatch when g_t does not match params.dims.
DenoiserOutput forward(const DenoiserParams& params, const NoisyGraph& g_t, int t);

// Scaled weighted cross-entropy of forward(params, g_t, t) against the
// target's one-hot rows: scale * (sum_i CE(node_i) + lambda * sum_cells
// CE(edge)). The gradient is analytic, covers every unfrozen parameter, and
// is identically zero on frozen layers. CE terms use log-softmax directly on
// the logits, so the loss matches the true softmax cross-entropy exactly.
std::pair<double, Gradients> loss_and_grad(const DenoiserParams& params, const NoisyGraph& g_t,
                                           int t, const OrderedDag& target, double lambda,
                                           double scale);

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;

    bool operator==(const AdamWConfig&) const = default;
};

// Serializable optimizer snapshot.
struct AdamWState {
    AdamWConfig cfg;
    long step_count = 0;
    Gradients m;
    Gradients v;
};

// Decoupled-weight-decay Adam with gradient accumulation. Each accumulate()
// call contributes one micro-batch mean gradient; step() averages the
// accumulated micro-batches, applies one update, and clears the accumulator.
// Frozen layers are skipped entirely: no moment update and no decay.
class AdamW {
public:
    AdamW() = default;
    explicit AdamW(const DenoiserParams& params, AdamWConfig cfg = {});

    void accumulate(const Gradients& g);
    void step(DenoiserParams& params, double lr);

    int pending() const { return accum_count_; }
    long step_count() const { return step_count_; }
    const AdamWConfig& config() const { return cfg_; }

    // Snapshot/load; both require an empty accumulator.
    AdamWState state() const;
    static AdamW from_state(AdamWState s);

private:
    AdamWConfig cfg_;
    long step_count_ = 0;
    Gradients m_;
    Gradients v_;
    Gradients accum_;
    int accum_count_ = 0;
};

// Marks the shortest prefix of layers (hidden first, then heads) whose
// cumulative parameter count reaches fraction * total. Returns the achieved
// fraction. Throws RangeError outside [0, 1].
double freeze_fraction(DenoiserParams& params, double fraction);

// Adapter: a DenoiserFn closure over fixed parameters, for reverse_generate.
DenoiserFn make_denoiser_fn(const DenoiserParams& params);

} // namespace dagpo
