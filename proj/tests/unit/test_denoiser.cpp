#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dagpo/checkpoint.hpp"
#include "dagpo/denoiser.hpp"
#include "dagpo/errors.hpp"
#include "test_util.hpp"

using namespace dagpo;
using namespace dagpo::testutil;

namespace {

DenoiserDims small_dims() {
    auto spec = SpaceSpec::synthetic(3, 2, 3);
    return DenoiserDims::for_space(spec, 2, 8, 2);
}

// Puts noise in every layer, heads included, so gradients flow everywhere.
void randomize_params(DenoiserParams& p, RngStream& rng) {
    for (auto& l : p.layers) {
        for (auto& w : l.W) w = rng.uniform() - 0.5;
        for (auto& b : l.b) b = rng.uniform() - 0.5;
    }
}

struct Instance {
    NoisyGraph g_t;
    OrderedDag target;
};

Instance random_instance(RngStream& rng, const SpaceSpec& spec, int t) {
    Instance inst;
    inst.target = topological_order(
        random_canonical_dag(rng, spec.max_nodes, spec.node_cats, spec.edge_cats));
    auto sch = cosine_schedule(16);
    inst.g_t = forward_sample(inst.target, t, sch, spec, rng);
    return inst;
}

double fd_loss(DenoiserParams& p, double* slot, double delta, const NoisyGraph& g_t, int t,
               const OrderedDag& target, double lambda, double scale) {
    double saved = *slot;
    *slot = saved + delta;
    double loss = loss_and_grad(p, g_t, t, target, lambda, scale).first;
    *slot = saved;
    return loss;
}

} // namespace

TEST_CASE("zero-initialized heads predict uniform distributions") {
    RngStream rng(41);
    auto spec = SpaceSpec::synthetic(3, 2, 3);
    auto p = DenoiserParams::init(small_dims(), 16, rng);
    NoisyGraph g = NoisyGraph::from_dag(Dag::empty(3), spec, 7);
    auto out = forward(p, g, 7);
    for (int i = 0; i < 3; ++i)
        for (double v : out.node_row(i)) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
    for (int e = 0; e < 3; ++e)
        for (double v : out.edge_row(e)) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("forward rows are positive, normalized, finite, and deterministic") {
    RngStream rng(42);
    auto spec = SpaceSpec::synthetic(3, 2, 3);
    auto p = DenoiserParams::init(small_dims(), 16, rng);
    randomize_params(p, rng);
    for (int rep = 0; rep < 50; ++rep) {
        auto inst = random_instance(rng, spec, rng.uniform_int(1, 16));
        auto out = forward(p, inst.g_t, inst.g_t.t);
        auto out2 = forward(p, inst.g_t, inst.g_t.t);
        REQUIRE(out.node_probs == out2.node_probs);
        REQUIRE(out.edge_probs == out2.edge_probs);
        for (int i = 0; i < 3; ++i) {
            double sum = 0.0;
            for (double v : out.node_row(i)) {
                REQUIRE(std::isfinite(v));
                REQUIRE(v > 0.0);
                sum += v;
            }
            REQUIRE(sum == doctest::Approx(1.0).epsilon(1e-6));
        }
        for (int e = 0; e < 3; ++e) {
            double sum = 0.0;
            for (double v : out.edge_row(e)) {
                REQUIRE(std::isfinite(v));
                REQUIRE(v > 0.0);
                sum += v;
            }
            REQUIRE(sum == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("extreme logits still yield positive normalized rows") {
    RngStream rng(43);
    auto p = DenoiserParams::init(small_dims(), 16, rng);
    // Huge head bias drives one class to probability ~1; the floor keeps the
    // rest strictly positive.
    for (auto& b : p.node_head().b) b = 0.0;
    p.node_head().b[0] = 5000.0;
    auto spec = SpaceSpec::synthetic(3, 2, 3);
    NoisyGraph g = NoisyGraph::from_dag(Dag::empty(3), spec, 1);
    auto out = forward(p, g, 1);
    for (double v : out.node_probs) {
        REQUIRE(std::isfinite(v));
        REQUIRE(v > 0.0);
    }
    CHECK(out.node_row(0)[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("forward validates dimensions and timestep") {
    RngStream rng(44);
    auto p = DenoiserParams::init(small_dims(), 16, rng);
    auto wrong_spec = SpaceSpec::synthetic(4, 2, 3);
    NoisyGraph wrong = NoisyGraph::from_dag(Dag::empty(4), wrong_spec, 1);
    CHECK_THROWS_AS(forward(p, wrong, 1), DimensionMismatch);
    auto spec = SpaceSpec::synthetic(3, 2, 3);
    NoisyGraph ok = NoisyGraph::from_dag(Dag::empty(3), spec, 1);
    CHECK_THROWS_AS(forward(p, ok, 17), RangeError);
    CHECK_THROWS_AS(forward(p, ok, -1), RangeError);
}

TEST_CASE("uniform predictions give the closed-form cross-entropy") {
    // a = 5 node categories, zero heads -> uniform rows -> node CE = ln 5 each.
    RngStream rng(45);
    auto spec = SpaceSpec::synthetic(4, 5, 3);
    auto dims = DenoiserDims::for_space(spec, 4, 8, 2);
    auto p = DenoiserParams::init(dims, 16, rng);
    auto inst = random_instance(rng, spec, 3);
    auto [loss0, grad0] = loss_and_grad(p, inst.g_t, inst.g_t.t, inst.target, 0.0, 1.0);
    CHECK(loss0 == doctest::Approx(4.0 * std::log(5.0)).epsilon(1e-12));
    // With the edge term: add lambda * cells * ln(edge_cats).
    auto [loss5, grad5] = loss_and_grad(p, inst.g_t, inst.g_t.t, inst.target, 5.0, 1.0);
    CHECK(loss5 == doctest::Approx(4.0 * std::log(5.0) + 5.0 * 6.0 * std::log(3.0)).epsilon(1e-12));
    // Scale multiplies both loss and gradient linearly.
    auto [loss_scaled, grad_scaled] = loss_and_grad(p, inst.g_t, inst.g_t.t, inst.target, 5.0, -2.5);
    CHECK(loss_scaled == doctest::Approx(-2.5 * loss5).epsilon(1e-12));
    for (std::size_t l = 0; l < grad5.gW.size(); ++l)
        for (std::size_t i = 0; i < grad5.gW[l].size(); ++i)
            REQUIRE(grad_scaled.gW[l][i] == doctest::Approx(-2.5 * grad5.gW[l][i]).epsilon(1e-9));
    (void)grad0;
}

TEST_CASE("near-point-mass output on the target drives the loss to zero") {
    RngStream rng(46);
    auto spec = SpaceSpec::synthetic(3, 2, 3);
    auto p = DenoiserParams::init(small_dims(), 16, rng);
    auto inst = random_instance(rng, spec, 2);
    NoisyGraph tgt_slots = NoisyGraph::from_dag(inst.target, spec, 0);
    // Bias each head row hard toward the target category.
    for (int i = 0; i < 3; ++i)
        p.node_head().b[static_cast<std::size_t>(i * 2 + tgt_slots.node_cat[static_cast<std::size_t>(i)])] = 200.0;
    for (int e = 0; e < 3; ++e)
        p.edge_head().b[static_cast<std::size_t>(e * 3 + tgt_slots.edge_cat[static_cast<std::size_t>(e)])] = 200.0;
    auto [loss, grad] = loss_and_grad(p, inst.g_t, inst.g_t.t, inst.target, 5.0, 1.0);
    CHECK(loss >= 0.0);
    CHECK(loss < 1e-9);
    (void)grad;
}

TEST_CASE("analytic gradients match central finite differences") {
    RngStream rng(47);
    auto spec = SpaceSpec::synthetic(3, 2, 3);
    const double h = 1e-4;
    double worst = 0.0;
    for (int instance = 0; instance < 20; ++instance) {
        auto p = DenoiserParams::init(small_dims(), 16, rng);
        randomize_params(p, rng);
        auto inst = random_instance(rng, spec, rng.uniform_int(1, 16));
        for (double lambda : {0.0, 1.0, 5.0}) {
            double scale = instance % 2 == 0 ? 1.0 : -1.7;
            auto [loss, grad] = loss_and_grad(p, inst.g_t, inst.g_t.t, inst.target, lambda, scale);
            (void)loss;
            for (std::size_t l = 0; l < p.layers.size(); ++l) {
                auto check_slot = [&](double* slot, double analytic) {
                    double up = fd_loss(p, slot, h, inst.g_t, inst.g_t.t, inst.target, lambda, scale);
                    double dn = fd_loss(p, slot, -h, inst.g_t, inst.g_t.t, inst.target, lambda, scale);
                    double fd = (up - dn) / (2.0 * h);
                    double rel = std::abs(analytic - fd) /
                                 std::max({std::abs(analytic), std::abs(fd), 1e-6});
                    worst = std::max(worst, rel);
                    REQUIRE(rel < 1e-4);
                };
                for (std::size_t i = 0; i < p.layers[l].W.size(); ++i)
                    check_slot(&p.layers[l].W[i], grad.gW[l][i]);
                for (std::size_t i = 0; i < p.layers[l].b.size(); ++i)
                    check_slot(&p.layers[l].b[i], grad.gb[l][i]);
            }
        }
    }
    MESSAGE("worst relative error: ", worst);
}

TEST_CASE("frozen layers report zero gradients") {
    RngStream rng(48);
    auto spec = SpaceSpec::synthetic(3, 2, 3);
    auto p = DenoiserParams::init(small_dims(), 16, rng);
    randomize_params(p, rng);
    p.layers[0].frozen = true;
    auto inst = random_instance(rng, spec, 5);
    auto [loss, grad] = loss_and_grad(p, inst.g_t, inst.g_t.t, inst.target, 5.0, 1.0);
    (void)loss;
    for (double v : grad.gW[0]) REQUIRE(v == 0.0);
    for (double v : grad.gb[0]) REQUIRE(v == 0.0);
    // Later layers still learn.
    CHECK(grad.max_abs() > 0.0);
}

TEST_CASE("freeze_fraction freezes the minimal earliest prefix") {
    RngStream rng(49);
    auto p = DenoiserParams::init(small_dims(), 16, rng);

    CHECK(freeze_fraction(p, 0.0) == 0.0);
    for (const auto& l : p.layers) CHECK(!l.frozen);

    CHECK(freeze_fraction(p, 1.0) == 1.0);
    for (const auto& l : p.layers) CHECK(l.frozen);

    double achieved = freeze_fraction(p, 0.75);
    CHECK(achieved >= 0.75);
    // Earliest-first: frozen flags form a prefix.
    bool seen_unfrozen = false;
    for (const auto& l : p.layers) {
        if (!l.frozen) seen_unfrozen = true;
        if (seen_unfrozen) CHECK(!l.frozen);
    }
    // Minimal: dropping the last frozen layer dips below the target.
    std::size_t frozen_params = p.frozen_param_count();
    std::size_t last_frozen = 0;
    for (std::size_t l = 0; l < p.layers.size(); ++l)
        if (p.layers[l].frozen) last_frozen = l;
    double without_last =
        static_cast<double>(frozen_params - p.layers[last_frozen].param_count()) /
        static_cast<double>(p.param_count());
    CHECK(without_last < 0.75);

    CHECK_THROWS_AS(freeze_fraction(p, -0.1), RangeError);
    CHECK_THROWS_AS(freeze_fraction(p, 1.1), RangeError);
}

TEST_CASE("AdamW with zero gradient is pure decoupled weight decay") {
    RngStream rng(50);
    auto p = DenoiserParams::init(small_dims(), 16, rng);
    randomize_params(p, rng);
    auto before = p.layers;
    AdamW opt(p);
    opt.accumulate(Gradients::zeros_like(p));
    const double lr = 0.01;
    opt.step(p, lr);
    for (std::size_t l = 0; l < p.layers.size(); ++l)
        for (std::size_t i = 0; i < p.layers[l].W.size(); ++i)
            REQUIRE(p.layers[l].W[i] ==
                    doctest::Approx(before[l].W[i] * (1.0 - lr * 0.01)).epsilon(1e-12));
}

TEST_CASE("frozen layers are bitwise invariant under updates") {
    RngStream rng(51);
    auto spec = SpaceSpec::synthetic(3, 2, 3);
    auto p = DenoiserParams::init(small_dims(), 16, rng);
    randomize_params(p, rng);
    freeze_fraction(p, 0.5);
    auto frozen_copy = p.layers;
    AdamW opt(p);
    for (int step = 0; step < 25; ++step) {
        auto inst = random_instance(rng, spec, rng.uniform_int(1, 16));
        opt.accumulate(loss_and_grad(p, inst.g_t, inst.g_t.t, inst.target, 5.0, 1.0).second);
        opt.step(p, 1e-3);
    }
    bool any_moved = false;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        if (p.layers[l].frozen) {
            REQUIRE(p.layers[l].W == frozen_copy[l].W);
            REQUIRE(p.layers[l].b == frozen_copy[l].b);
        } else if (p.layers[l].W != frozen_copy[l].W) {
            any_moved = true;
        }
    }
    CHECK(any_moved);
}

TEST_CASE("two accumulated half-batches equal one full batch") {
    RngStream rng(52);
    auto spec = SpaceSpec::synthetic(3, 2, 3);
    auto p1 = DenoiserParams::init(small_dims(), 16, rng);
    randomize_params(p1, rng);
    auto p2 = p1;

    auto i1 = random_instance(rng, spec, 4);
    auto i2 = random_instance(rng, spec, 9);
    auto g1 = loss_and_grad(p1, i1.g_t, i1.g_t.t, i1.target, 5.0, 1.0).second;
    auto g2 = loss_and_grad(p1, i2.g_t, i2.g_t.t, i2.target, 5.0, 1.0).second;

    AdamW opt1(p1);
    opt1.accumulate(g1);
    opt1.accumulate(g2);
    opt1.step(p1, 1e-3);

    Gradients full = g1;
    full.add(g2);
    full.scale(0.5);
    AdamW opt2(p2);
    opt2.accumulate(full);
    opt2.step(p2, 1e-3);

    for (std::size_t l = 0; l < p1.layers.size(); ++l) {
        for (std::size_t i = 0; i < p1.layers[l].W.size(); ++i)
            REQUIRE(p1.layers[l].W[i] == doctest::Approx(p2.layers[l].W[i]).epsilon(1e-10));
        for (std::size_t i = 0; i < p1.layers[l].b.size(); ++i)
            REQUIRE(p1.layers[l].b[i] == doctest::Approx(p2.layers[l].b[i]).epsilon(1e-10));
    }
}

TEST_CASE("AdamW guards its contract") {
    RngStream rng(53);
    auto p = DenoiserParams::init(small_dims(), 16, rng);
    AdamW opt(p);
    CHECK_THROWS_AS(opt.step(p, 1e-3), RangeError);
    opt.accumulate(Gradients::zeros_like(p));
    CHECK(opt.pending() == 1);
    CHECK_THROWS_AS(opt.state(), CheckpointError);
    opt.step(p, 1e-3);
    CHECK(opt.pending() == 0);
    CHECK(opt.step_count() == 1);
    auto s = opt.state();
    CHECK(s.step_count == 1);
}

TEST_CASE("checkpoint serialization round-trips bit-exactly") {
    RngStream rng(54);
    auto spec = SpaceSpec::synthetic(3, 2, 3);
    Checkpoint ck;
    ck.space = spec;
    ck.schedule_T = 16;
    ck.schedule_s = 0.008;
    ck.params = DenoiserParams::init(small_dims(), 16, rng);
    randomize_params(ck.params, rng);
    freeze_fraction(ck.params, 0.5);
    ck.optimizer = AdamW(ck.params);
    // Give the moments real values.
    for (int step = 0; step < 3; ++step) {
        auto inst = random_instance(rng, spec, 3);
        ck.optimizer.accumulate(
            loss_and_grad(ck.params, inst.g_t, inst.g_t.t, inst.target, 5.0, 1.0).second);
        ck.optimizer.step(ck.params, 1e-3);
    }
    ck.rng_state = rng.save_state();
    ck.epoch = 17;

    std::string bytes = serialize_checkpoint(ck);
    Checkpoint back = deserialize_checkpoint(bytes);
    CHECK(back.space == ck.space);
    CHECK(back.schedule_T == 16);
    CHECK(back.schedule_s == 0.008);
    CHECK(back.params == ck.params);
    CHECK(back.rng_state == ck.rng_state);
    CHECK(back.epoch == 17);
    CHECK(back.optimizer.step_count() == ck.optimizer.step_count());
    // Bit-exact: re-serialization reproduces the byte stream.
    CHECK(serialize_checkpoint(back) == bytes);

    // Behavioral equivalence: one more identical step matches exactly.
    auto inst = random_instance(rng, spec, 2);
    auto g = loss_and_grad(ck.params, inst.g_t, inst.g_t.t, inst.target, 5.0, 1.0).second;
    ck.optimizer.accumulate(g);
    ck.optimizer.step(ck.params, 1e-3);
    back.optimizer.accumulate(g);
    back.optimizer.step(back.params, 1e-3);
    CHECK(back.params == ck.params);
}

TEST_CASE("checkpoint rejects corrupt bytes") {
    RngStream rng(55);
    Checkpoint ck;
    ck.space = SpaceSpec::synthetic(3, 2, 3);
    ck.params = DenoiserParams::init(small_dims(), 16, rng);
    ck.optimizer = AdamW(ck.params);
    ck.rng_state = rng.save_state();
    std::string bytes = serialize_checkpoint(ck);

    CHECK_THROWS_AS(deserialize_checkpoint("garbage"), CheckpointError);
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_checkpoint(bad_magic), CheckpointError);
    CHECK_THROWS_AS(deserialize_checkpoint(std::string_view(bytes).substr(0, bytes.size() / 2)),
                    CheckpointError);
    std::string trailing = bytes + "x";
    CHECK_THROWS_AS(deserialize_checkpoint(trailing), CheckpointError);
    std::string bad_version = bytes;
    bad_version[8] = 99;
    CHECK_THROWS_AS(deserialize_checkpoint(bad_version), CheckpointError);
}

TEST_CASE("checkpoint file round trip") {
    RngStream rng(56);
    Checkpoint ck;
    ck.space = SpaceSpec::synthetic(3, 2, 3);
    ck.params = DenoiserParams::init(small_dims(), 16, rng);
    randomize_params(ck.params, rng);
    ck.optimizer = AdamW(ck.params);
    ck.rng_state = rng.save_state();
    ck.epoch = 3;
    std::string path = "test_denoiser_ckpt.bin";
    save_checkpoint(ck, path);
    Checkpoint back = load_checkpoint(path);
    CHECK(back.params == ck.params);
    CHECK(back.epoch == 3);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_checkpoint("does_not_exist.bin"), IoError);
}

TEST_CASE("denoiser fn adapter matches forward and drives generation") {
    RngStream rng(57);
    auto spec = SpaceSpec::synthetic(3, 2, 3);
    auto p = DenoiserParams::init(small_dims(), 16, rng);
    randomize_params(p, rng);
    auto fn = make_denoiser_fn(p);
    NoisyGraph g = NoisyGraph::from_dag(Dag::empty(3), spec, 9);
    auto a = fn(g);
    auto b = forward(p, g, 9);
    CHECK(a.node_probs == b.node_probs);
    CHECK(a.edge_probs == b.edge_probs);

    auto sch = cosine_schedule(16);
    RngStream gen(1);
    auto traj = reverse_generate(fn, sch, spec, gen);
    CHECK(validate(traj.final, spec).ok());
}
