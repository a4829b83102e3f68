#include "dagpo/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dagpo/errors.hpp"

namespace dagpo {

namespace {

constexpr double kProbFloor = 1e-12;

const PositionalEncodingTable& pe_table(int n, int dim) {
    thread_local std::map<std::pair<int, int>, PositionalEncodingTable> cache;
    auto key = std::make_pair(n, dim);
    auto it = cache.find(key);
    if (it == cache.end())
        it = cache.emplace(key, PositionalEncodingTable(n, dim)).first;
    return it->second;
}

void check_input(const DenoiserParams& params, const NoisyGraph& g_t, int t) {
    const auto& d = params.dims;
    if (g_t.n != d.n || g_t.node_cats != d.node_cats || g_t.edge_cats != d.edge_cats)
        throw DimensionMismatch("denoiser: noisy graph does not match network dimensions");
    if (g_t.node_cat.size() != static_cast<std::size_t>(d.n) ||
        g_t.edge_cat.size() != static_cast<std::size_t>(d.upper_cells()))
        throw DimensionMismatch("denoiser: noisy graph slot arrays have the wrong size");
    if (t < 0 || t > params.T)
        throw RangeError("denoiser: timestep must lie in [0, T]");
}

std::vector<double> build_input(const DenoiserParams& params, const NoisyGraph& g_t, int t) {
    const auto& d = params.dims;
    std::vector<double> x(static_cast<std::size_t>(d.input_width()), 0.0);
    std::size_t off = 0;
    for (int i = 0; i < d.n; ++i)
        x[off + static_cast<std::size_t>(i * d.node_cats + g_t.node_cat[static_cast<std::size_t>(i)])] = 1.0;
    off += static_cast<std::size_t>(d.n * d.node_cats);
    const auto& pe = pe_table(d.n, d.pe_dim);
    for (int i = 0; i < d.n; ++i) {
        auto row = pe.row(i);
        std::copy(row.begin(), row.end(), x.begin() + static_cast<std::ptrdiff_t>(off) +
                                              static_cast<std::ptrdiff_t>(i * d.pe_dim));
    }
    off += static_cast<std::size_t>(d.n * d.pe_dim);
    for (int e = 0; e < d.upper_cells(); ++e)
        x[off + static_cast<std::size_t>(e * d.edge_cats + g_t.edge_cat[static_cast<std::size_t>(e)])] = 1.0;
    off += static_cast<std::size_t>(d.upper_cells() * d.edge_cats);
    x[off] = static_cast<double>(t) / static_cast<double>(params.T);
    return x;
}

// y = W x + b
void affine(const DenseLayer& layer, const std::vector<double>& x, std::vector<double>& y) {
    y.resize(static_cast<std::size_t>(layer.out));
    const double* w = layer.W.data();
    for (int r = 0; r < layer.out; ++r) {
        double acc = layer.b[static_cast<std::size_t>(r)];
        const double* row = w + static_cast<std::size_t>(r) * static_cast<std::size_t>(layer.in);
        for (int c = 0; c < layer.in; ++c) acc += row[c] * x[static_cast<std::size_t>(c)];
        y[static_cast<std::size_t>(r)] = acc;
    }
}

struct ForwardPass {
    std::vector<double> input;
    std::vector<std::vector<double>> pre;  // hidden pre-activations
    std::vector<std::vector<double>> act;  // hidden post-ReLU
    std::vector<double> node_logits;
    std::vector<double> edge_logits;
};

ForwardPass run_forward(const DenoiserParams& params, const NoisyGraph& g_t, int t) {
    check_input(params, g_t, t);
    const auto& d = params.dims;
    ForwardPass fp;
    fp.input = build_input(params, g_t, t);
    fp.pre.resize(static_cast<std::size_t>(d.hidden_layers));
    fp.act.resize(static_cast<std::size_t>(d.hidden_layers));
    const std::vector<double>* cur = &fp.input;
    for (int l = 0; l < d.hidden_layers; ++l) {
        auto& pre = fp.pre[static_cast<std::size_t>(l)];
        affine(params.layers[static_cast<std::size_t>(l)], *cur, pre);
        auto& act = fp.act[static_cast<std::size_t>(l)];
        act.resize(pre.size());
        for (std::size_t i = 0; i < pre.size(); ++i) act[i] = pre[i] > 0.0 ? pre[i] : 0.0;
        cur = &act;
    }
    affine(params.node_head(), *cur, fp.node_logits);
    affine(params.edge_head(), *cur, fp.edge_logits);
    return fp;
}

// Softmax of one logit row into out, floored and renormalized.
void softmax_row(const double* logits, int K, double* out) {
    double mx = logits[0];
    for (int i = 1; i < K; ++i) mx = std::max(mx, logits[i]);
    double z = 0.0;
    for (int i = 0; i < K; ++i) {
        out[i] = std::exp(logits[i] - mx);
        z += out[i];
    }
    double renorm = 0.0;
    for (int i = 0; i < K; ++i) {
        out[i] = std::max(out[i] / z, kProbFloor);
        renorm += out[i];
    }
    for (int i = 0; i < K; ++i) out[i] /= renorm;
}

// Cross-entropy -log softmax(logits)[target] and d(loss)/d(logits) scaled by
// weight, accumulated into grad_logits.
double ce_row(const double* logits, int K, int target, double weight, double* grad_logits) {
    double mx = logits[0];
    for (int i = 1; i < K; ++i) mx = std::max(mx, logits[i]);
    double z = 0.0;
    for (int i = 0; i < K; ++i) z += std::exp(logits[i] - mx);
    double lse = mx + std::log(z);
    for (int i = 0; i < K; ++i) {
        double p = std::exp(logits[i] - lse);
        grad_logits[i] = weight * (p - (i == target ? 1.0 : 0.0));
    }
    return weight * (lse - logits[target]);
}

// grad_x += W^T dy ; gW += dy x^T ; gb += dy
void backprop_layer(const DenseLayer& layer, const std::vector<double>& x,
                    const std::vector<double>& dy, std::vector<double>& gW,
                    std::vector<double>& gb, std::vector<double>* grad_x) {
    for (int r = 0; r < layer.out; ++r) {
        double d = dy[static_cast<std::size_t>(r)];
        if (d == 0.0) continue;
        gb[static_cast<std::size_t>(r)] += d;
        double* grow = gW.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(layer.in);
        const double* wrow = layer.W.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(layer.in);
        if (grad_x) {
            double* gx = grad_x->data();
            for (int c = 0; c < layer.in; ++c) {
                grow[c] += d * x[static_cast<std::size_t>(c)];
                gx[c] += d * wrow[c];
            }
        } else {
            for (int c = 0; c < layer.in; ++c) grow[c] += d * x[static_cast<std::size_t>(c)];
        }
    }
}

} // namespace

DenoiserDims DenoiserDims::for_space(const SpaceSpec& spec, int pe_dim, int hidden,
                                     int hidden_layers) {
    DenoiserDims d;
    d.n = spec.max_nodes;
    d.node_cats = spec.node_cats;
    d.edge_cats = spec.edge_cats;
    d.pe_dim = pe_dim;
    d.hidden = hidden;
    d.hidden_layers = hidden_layers;
    return d;
}

std::size_t DenoiserParams::param_count() const {
    std::size_t c = 0;
    for (const auto& l : layers) c += l.param_count();
    return c;
}

std::size_t DenoiserParams::frozen_param_count() const {
    std::size_t c = 0;
    for (const auto& l : layers)
        if (l.frozen) c += l.param_count();
    return c;
}

double DenoiserParams::frozen_fraction() const {
    std::size_t total = param_count();
    return total == 0 ? 0.0 : static_cast<double>(frozen_param_count()) / static_cast<double>(total);
}

DenoiserParams DenoiserParams::init(const DenoiserDims& dims, int T, RngStream& rng) {
    if (dims.n < 1 || dims.node_cats < 1 || dims.edge_cats < 1)
        throw InvalidDim("denoiser init: graph dimensions must be positive");
    if (dims.pe_dim <= 0 || dims.pe_dim % 2 != 0)
        throw InvalidDim("denoiser init: pe_dim must be positive and even");
    if (dims.hidden < 1 || dims.hidden_layers < 1)
        throw InvalidDim("denoiser init: need at least one hidden layer of width >= 1");
    if (T < 1) throw InvalidDim("denoiser init: T must be positive");

    DenoiserParams p;
    p.dims = dims;
    p.T = T;
    auto make_layer = [&](int in, int out, bool kaiming) {
        DenseLayer l;
        l.in = in;
        l.out = out;
        l.W.assign(static_cast<std::size_t>(in) * static_cast<std::size_t>(out), 0.0);
        l.b.assign(static_cast<std::size_t>(out), 0.0);
        if (kaiming) {
            double limit = std::sqrt(6.0 / static_cast<double>(in));
            for (auto& w : l.W) w = (rng.uniform() * 2.0 - 1.0) * limit;
        }
        return l;
    };
    int in = dims.input_width();
    for (int l = 0; l < dims.hidden_layers; ++l) {
        p.layers.push_back(make_layer(in, dims.hidden, true));
        in = dims.hidden;
    }
    p.layers.push_back(make_layer(dims.hidden, dims.node_out(), false));
    p.layers.push_back(make_layer(dims.hidden, dims.edge_out(), false));
    return p;
}

Gradients Gradients::zeros_like(const DenoiserParams& params) {
    Gradients g;
    g.gW.reserve(params.layers.size());
    g.gb.reserve(params.layers.size());
    for (const auto& l : params.layers) {
        g.gW.emplace_back(l.W.size(), 0.0);
        g.gb.emplace_back(l.b.size(), 0.0);
    }
    return g;
}

void Gradients::add(const Gradients& other) {
    if (gW.size() != other.gW.size()) throw DimensionMismatch("Gradients::add: layer count differs");
    for (std::size_t l = 0; l < gW.size(); ++l) {
        if (gW[l].size() != other.gW[l].size() || gb[l].size() != other.gb[l].size())
            throw DimensionMismatch("Gradients::add: layer shape differs");
        for (std::size_t i = 0; i < gW[l].size(); ++i) gW[l][i] += other.gW[l][i];
        for (std::size_t i = 0; i < gb[l].size(); ++i) gb[l][i] += other.gb[l][i];
    }
}

void Gradients::scale(double factor) {
    for (auto& v : gW)
        for (auto& x : v) x *= factor;
    for (auto& v : gb)
        for (auto& x : v) x *= factor;
}

double Gradients::max_abs() const {
    double mx = 0.0;
    for (const auto& v : gW)
        for (double x : v) mx = std::max(mx, std::abs(x));
    for (const auto& v : gb)
        for (double x : v) mx = std::max(mx, std::abs(x));
    return mx;
}

DenoiserOutput forward(const DenoiserParams& params, const NoisyGraph& g_t, int t) {
    ForwardPass fp = run_forward(params, g_t, t);
    const auto& d = params.dims;
    DenoiserOutput out;
    out.n = d.n;
    out.node_cats = d.node_cats;
    out.edge_cats = d.edge_cats;
    out.node_probs.resize(static_cast<std::size_t>(d.node_out()));
    out.edge_probs.resize(static_cast<std::size_t>(d.edge_out()));
    for (int i = 0; i < d.n; ++i)
        softmax_row(fp.node_logits.data() + static_cast<std::size_t>(i * d.node_cats), d.node_cats,
                    out.node_probs.data() + static_cast<std::size_t>(i * d.node_cats));
    for (int e = 0; e < d.upper_cells(); ++e)
        softmax_row(fp.edge_logits.data() + static_cast<std::size_t>(e * d.edge_cats), d.edge_cats,
                    out.edge_probs.data() + static_cast<std::size_t>(e * d.edge_cats));
    return out;
}

std::pair<double, Gradients> loss_and_grad(const DenoiserParams& params, const NoisyGraph& g_t,
                                           int t, const OrderedDag& target, double lambda,
                                           double scale) {
    const auto& d = params.dims;
    SpaceSpec shape{"", d.n, d.node_cats, d.edge_cats, SpaceRules::none};
    NoisyGraph tgt = NoisyGraph::from_dag(target, shape, 0);

    ForwardPass fp = run_forward(params, g_t, t);
    Gradients grad = Gradients::zeros_like(params);

    double loss = 0.0;
    std::vector<double> dnode(fp.node_logits.size());
    std::vector<double> dedge(fp.edge_logits.size());
    for (int i = 0; i < d.n; ++i)
        loss += ce_row(fp.node_logits.data() + static_cast<std::size_t>(i * d.node_cats),
                       d.node_cats, tgt.node_cat[static_cast<std::size_t>(i)], scale,
                       dnode.data() + static_cast<std::size_t>(i * d.node_cats));
    for (int e = 0; e < d.upper_cells(); ++e)
        loss += ce_row(fp.edge_logits.data() + static_cast<std::size_t>(e * d.edge_cats),
                       d.edge_cats, tgt.edge_cat[static_cast<std::size_t>(e)], scale * lambda,
                       dedge.data() + static_cast<std::size_t>(e * d.edge_cats));

    // Heads share the last hidden activation.
    std::size_t last = static_cast<std::size_t>(d.hidden_layers - 1);
    std::vector<double> dh(static_cast<std::size_t>(d.hidden), 0.0);
    std::size_t node_idx = static_cast<std::size_t>(d.hidden_layers);
    std::size_t edge_idx = node_idx + 1;
    backprop_layer(params.layers[node_idx], fp.act[last], dnode, grad.gW[node_idx],
                   grad.gb[node_idx], &dh);
    backprop_layer(params.layers[edge_idx], fp.act[last], dedge, grad.gW[edge_idx],
                   grad.gb[edge_idx], &dh);

    for (int l = d.hidden_layers - 1; l >= 0; --l) {
        auto li = static_cast<std::size_t>(l);
        std::vector<double>& pre = fp.pre[li];
        // ReLU gate.
        for (std::size_t i = 0; i < dh.size(); ++i)
            if (pre[i] <= 0.0) dh[i] = 0.0;
        const std::vector<double>& x = l == 0 ? fp.input : fp.act[li - 1];
        if (l == 0) {
            backprop_layer(params.layers[li], x, dh, grad.gW[li], grad.gb[li], nullptr);
        } else {
            std::vector<double> dx(x.size(), 0.0);
            backprop_layer(params.layers[li], x, dh, grad.gW[li], grad.gb[li], &dx);
            dh = std::move(dx);
        }
    }

    // Freeze contract: frozen layers report exactly zero gradient.
    for (std::size_t l = 0; l < params.layers.size(); ++l)
        if (params.layers[l].frozen) {
            std::fill(grad.gW[l].begin(), grad.gW[l].end(), 0.0);
            std::fill(grad.gb[l].begin(), grad.gb[l].end(), 0.0);
        }

    return {loss, std::move(grad)};
}

AdamW::AdamW(const DenoiserParams& params, AdamWConfig cfg)
    : cfg_(cfg),
      m_(Gradients::zeros_like(params)),
      v_(Gradients::zeros_like(params)),
      accum_(Gradients::zeros_like(params)) {}

void AdamW::accumulate(const Gradients& g) {
    accum_.add(g);
    ++accum_count_;
}

void AdamW::step(DenoiserParams& params, double lr) {
    if (accum_count_ == 0) throw RangeError("AdamW::step: nothing accumulated");
    if (params.layers.size() != m_.gW.size())
        throw DimensionMismatch("AdamW::step: parameter shape does not match optimizer state");
    ++step_count_;
    const double inv = 1.0 / static_cast<double>(accum_count_);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));

    auto update = [&](std::vector<double>& w, std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            double grad = g[i] * inv;
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * grad;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * grad * grad;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            w[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w[i]);
        }
    };
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& layer = params.layers[l];
        if (layer.frozen) continue;
        update(layer.W, accum_.gW[l], m_.gW[l], v_.gW[l]);
        update(layer.b, accum_.gb[l], m_.gb[l], v_.gb[l]);
    }
    for (auto& v : accum_.gW) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : accum_.gb) std::fill(v.begin(), v.end(), 0.0);
    accum_count_ = 0;
}

AdamWState AdamW::state() const {
    if (accum_count_ != 0)
        throw CheckpointError("AdamW::state: cannot snapshot with pending accumulation");
    return AdamWState{cfg_, step_count_, m_, v_};
}

AdamW AdamW::from_state(AdamWState s) {
    AdamW opt;
    opt.cfg_ = s.cfg;
    opt.step_count_ = s.step_count;
    opt.m_ = std::move(s.m);
    opt.v_ = std::move(s.v);
    opt.accum_ = opt.m_;
    for (auto& v : opt.accum_.gW) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : opt.accum_.gb) std::fill(v.begin(), v.end(), 0.0);
    opt.accum_count_ = 0;
    return opt;
}

double freeze_fraction(DenoiserParams& params, double fraction) {
    if (fraction < 0.0 || fraction > 1.0)
        throw RangeError("freeze_fraction: fraction must lie in [0, 1]");
    const double target = fraction * static_cast<double>(params.param_count());
    double cum = 0.0;
    for (auto& l : params.layers) l.frozen = false;
    for (auto& l : params.layers) {
        if (cum >= target) break;
        l.frozen = true;
        cum += static_cast<double>(l.param_count());
    }
    return params.frozen_fraction();
}

DenoiserFn make_denoiser_fn(const DenoiserParams& params) {
    const DenoiserParams* p = &params;
    return [p](const NoisyGraph& g) { return forward(*p, g, g.t); };
}

} // namespace dagpo
