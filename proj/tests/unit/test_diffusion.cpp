#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dagpo/diffusion.hpp"
#include "dagpo/errors.hpp"
#include "test_util.hpp"

using namespace dagpo;
using namespace dagpo::testutil;

namespace {

// Dense K x K uniform kernel for step t, built without the library's closed
// forms: Q[i][j] = P(x_t = j | x_{t-1} = i).
std::vector<std::vector<double>> step_kernel(double alpha_t, int K) {
    std::vector<std::vector<double>> Q(static_cast<std::size_t>(K),
                                       std::vector<double>(static_cast<std::size_t>(K)));
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j)
            Q[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                (i == j ? alpha_t : 0.0) + (1.0 - alpha_t) / K;
    return Q;
}

std::vector<std::vector<double>> matmul(const std::vector<std::vector<double>>& A,
                                        const std::vector<std::vector<double>>& B) {
    auto K = A.size();
    std::vector<std::vector<double>> C(K, std::vector<double>(K, 0.0));
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t j = 0; j < K; ++j) C[i][j] += A[i][k] * B[k][j];
    return C;
}

// Point-mass denoiser used for collapse tests.
DenoiserFn point_mass_denoiser(const NoisyGraph& target) {
    return [target](const NoisyGraph& g) {
        DenoiserOutput out;
        out.n = g.n;
        out.node_cats = g.node_cats;
        out.edge_cats = g.edge_cats;
        out.node_probs.assign(static_cast<std::size_t>(g.n) * static_cast<std::size_t>(g.node_cats), 0.0);
        out.edge_probs.assign(target.edge_cat.size() * static_cast<std::size_t>(g.edge_cats), 0.0);
        for (int i = 0; i < g.n; ++i)
            out.node_probs[static_cast<std::size_t>(i * g.node_cats +
                                                    target.node_cat[static_cast<std::size_t>(i)])] = 1.0;
        for (std::size_t e = 0; e < target.edge_cat.size(); ++e)
            out.edge_probs[e * static_cast<std::size_t>(g.edge_cats) +
                           static_cast<std::size_t>(target.edge_cat[e])] = 1.0;
        return out;
    };
}

DenoiserFn uniform_denoiser() {
    return [](const NoisyGraph& g) {
        DenoiserOutput out;
        out.n = g.n;
        out.node_cats = g.node_cats;
        out.edge_cats = g.edge_cats;
        out.node_probs.assign(static_cast<std::size_t>(g.n) * static_cast<std::size_t>(g.node_cats),
                              1.0 / g.node_cats);
        out.edge_probs.assign(g.edge_cat.size() * static_cast<std::size_t>(g.edge_cats),
                              1.0 / g.edge_cats);
        return out;
    };
}

} // namespace

TEST_CASE("cosine schedule endpoints, shape, and frozen values") {
    auto sch = cosine_schedule(800, 0.008);
    REQUIRE(sch.alpha_bar.size() == 801);
    CHECK(sch.alpha_bar[0] == 1.0);
    CHECK(sch.alpha_bar[800] < 0.01);
    for (int t = 0; t < 800; ++t)
        REQUIRE(sch.alpha_bar[static_cast<std::size_t>(t + 1)] <=
                sch.alpha_bar[static_cast<std::size_t>(t)]);
    // Closed-form values computed independently.
    CHECK(sch.alpha_bar[400] == doctest::Approx(0.493843590440638).epsilon(1e-12));
    CHECK(sch.alpha_bar[200] == doctest::Approx(0.847012161326905).epsilon(1e-12));
    CHECK(sch.alpha_bar[600] == doctest::Approx(0.144272102385736).epsilon(1e-12));

    auto tiny = cosine_schedule(1);
    REQUIRE(tiny.alpha_bar.size() == 2);
    CHECK(tiny.alpha_bar[0] == 1.0);
    CHECK_THROWS_AS(cosine_schedule(0), RangeError);
    CHECK_THROWS_AS(cosine_schedule(10, 0.0), RangeError);
}

TEST_CASE("per-step retention and keep probability follow the schedule") {
    auto sch = cosine_schedule(100);
    for (int t = 1; t <= 100; ++t) {
        double a = sch.alpha(t);
        REQUIRE(a >= 0.0);
        REQUIRE(a <= 1.0 + 1e-12);
        REQUIRE(a * sch.alpha_bar[static_cast<std::size_t>(t - 1)] ==
                doctest::Approx(sch.alpha_bar[static_cast<std::size_t>(t)]).epsilon(1e-12));
        // Implied kernel rows sum to one for any category count.
        for (int K : {2, 3, 6}) {
            double row = a + (1.0 - a) / K + (K - 1) * ((1.0 - a) / K);
            REQUIRE(row == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    CHECK(sch.keep_probability(0, 3) == doctest::Approx(1.0));
    int K = 5;
    double ab = sch.alpha_bar[60];
    CHECK(sch.keep_probability(60, K) == doctest::Approx(ab + (1 - ab) / K).epsilon(1e-12));
    CHECK_THROWS_AS(sch.alpha(0), RangeError);
    CHECK_THROWS_AS(sch.alpha(101), RangeError);
    CHECK_THROWS_AS(sch.keep_probability(-1, 3), RangeError);
}

TEST_CASE("cumulative kernel product matches the closed form") {
    // Multiply the explicit per-step kernels; the result must equal
    // alpha_bar[t] * I + (1 - alpha_bar[t])/K * ones.
    auto sch = cosine_schedule(16);
    const int K = 4;
    auto acc = step_kernel(sch.alpha(1), K);
    for (int t = 2; t <= 16; ++t) {
        acc = matmul(acc, step_kernel(sch.alpha(t), K));
        double ab = sch.alpha_bar[static_cast<std::size_t>(t)];
        for (int i = 0; i < K; ++i)
            for (int j = 0; j < K; ++j) {
                double expect = (i == j ? ab : 0.0) + (1.0 - ab) / K;
                REQUIRE(acc[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] ==
                        doctest::Approx(expect).epsilon(1e-12));
            }
    }
}

TEST_CASE("forward sampling is the identity under a noiseless step") {
    NoiseSchedule sch;
    sch.T = 2;
    sch.alpha_bar = {1.0, 1.0, 0.5};
    auto spec = SpaceSpec::synthetic(5, 2, 3);
    RngStream rng(31);
    for (int rep = 0; rep < 50; ++rep) {
        OrderedDag g0 = topological_order(random_canonical_dag(rng, 5, 2, 3));
        NoisyGraph noisy = forward_sample(g0, 1, sch, spec, rng);
        REQUIRE(noisy.to_dag() == recover_dag(5, g0.edges, g0.node_labels));
    }
}

TEST_CASE("forward marginal matches the keep-probability law") {
    auto sch = cosine_schedule(800);
    auto spec = SpaceSpec::synthetic(2, 4, 4);
    RngStream rng(32);
    OrderedDag g0 = topological_order(random_canonical_dag(rng, 2, 4, 4));
    const int draws = 10000;
    for (int t : {200, 400, 800}) {
        int keep_node = 0;
        std::vector<int> node_freq(4, 0);
        for (int i = 0; i < draws; ++i) {
            NoisyGraph noisy = forward_sample(g0, t, sch, spec, rng);
            if (noisy.node_cat[0] == g0.node_labels[0]) ++keep_node;
            ++node_freq[static_cast<std::size_t>(noisy.node_cat[1])];
        }
        double expect = sch.keep_probability(t, 4);
        CHECK(std::abs(keep_node / double(draws) - expect) < 0.02);
        if (t == 800) {
            // Fully corrupted: every category near 1/K.
            for (int c = 0; c < 4; ++c)
                CHECK(std::abs(node_freq[static_cast<std::size_t>(c)] / double(draws) - 0.25) < 0.02);
        }
    }
    CHECK_THROWS_AS(forward_sample(g0, 0, sch, spec, rng), RangeError);
    CHECK_THROWS_AS(forward_sample(g0, 801, sch, spec, rng), RangeError);
}

TEST_CASE("posterior is a point mass under a noiseless chain") {
    NoiseSchedule sch;
    sch.T = 2;
    sch.alpha_bar = {1.0, 1.0, 1.0};
    std::vector<double> x0{0.0, 1.0, 0.0};
    auto q = posterior_step_distribution(1, x0, 2, sch);
    REQUIRE(q.size() == 3);
    CHECK(q[1] == doctest::Approx(1.0));
    CHECK(q[0] == doctest::Approx(0.0));
    CHECK(q[2] == doctest::Approx(0.0));
}

TEST_CASE("posterior at t=1 concentrates on the predicted clean category") {
    auto sch = cosine_schedule(800);
    std::vector<double> x0{0.0, 0.0, 1.0, 0.0};
    for (int xt = 0; xt < 4; ++xt) {
        auto q = posterior_step_distribution(xt, x0, 1, sch);
        CHECK(q[2] == doctest::Approx(1.0));
    }
}

TEST_CASE("posterior equals brute-force Bayes over the joint table") {
    // Oracle: P(x_{t-1}=j | x_t=i) from the explicit joint
    //   P(x_{t-1}=j, x_t=i) = sum_c p_c Qbar_{t-1}[c][j] Q_t[j][i]
    // with Qbar built by multiplying per-step kernels, no closed form.
    RngStream rng(33);
    auto sch = cosine_schedule(64);
    for (int rep = 0; rep < 100; ++rep) {
        int K = rng.uniform_int(2, 5);
        int t = rng.uniform_int(1, 64);
        std::vector<double> p(static_cast<std::size_t>(K));
        double sum = 0.0;
        for (auto& v : p) {
            v = rng.uniform() + 1e-3;
            sum += v;
        }
        for (auto& v : p) v /= sum;

        auto qbar = step_kernel(1.0, K);  // identity at t=0
        for (int k = 1; k <= t - 1; ++k) qbar = matmul(qbar, step_kernel(sch.alpha(k), K));
        auto qt = step_kernel(sch.alpha(t), K);

        int xt = rng.uniform_int(0, K - 1);
        std::vector<double> joint(static_cast<std::size_t>(K), 0.0);
        double z = 0.0;
        for (int j = 0; j < K; ++j) {
            double occ = 0.0;
            for (int c = 0; c < K; ++c)
                occ += p[static_cast<std::size_t>(c)] *
                       qbar[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)];
            joint[static_cast<std::size_t>(j)] =
                occ * qt[static_cast<std::size_t>(j)][static_cast<std::size_t>(xt)];
            z += joint[static_cast<std::size_t>(j)];
        }
        auto q = posterior_step_distribution(xt, p, t, sch);
        double total = 0.0;
        for (int j = 0; j < K; ++j) {
            REQUIRE(std::abs(q[static_cast<std::size_t>(j)] -
                             joint[static_cast<std::size_t>(j)] / z) <= 1e-10);
            total += q[static_cast<std::size_t>(j)];
        }
        REQUIRE(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("posterior validates its inputs") {
    auto sch = cosine_schedule(8);
    std::vector<double> ok{0.5, 0.5};
    std::vector<double> zero{0.0, 0.0};
    std::vector<double> neg{1.5, -0.5};
    CHECK_THROWS_AS(posterior_step_distribution(0, ok, 0, sch), RangeError);
    CHECK_THROWS_AS(posterior_step_distribution(0, ok, 9, sch), RangeError);
    CHECK_THROWS_AS(posterior_step_distribution(2, ok, 3, sch), RangeError);
    CHECK_THROWS_AS(posterior_step_distribution(0, zero, 3, sch), DegenerateDistribution);
    CHECK_THROWS_AS(posterior_step_distribution(0, neg, 3, sch), DegenerateDistribution);
}

TEST_CASE("reverse generation collapses onto a point-mass denoiser target") {
    auto spec = SpaceSpec::synthetic(5, 2, 3);
    auto sch = cosine_schedule(64);
    RngStream init(34);
    Dag target = random_canonical_dag(init, 5, 2, 3);
    NoisyGraph target_slots = NoisyGraph::from_dag(target, spec, 0);
    auto denoiser = point_mass_denoiser(target_slots);
    for (unsigned seed = 0; seed < 10; ++seed) {
        RngStream rng(seed);
        Trajectory traj = reverse_generate(denoiser, sch, spec, rng);
        REQUIRE(traj.intermediates.size() == 64);
        REQUIRE(static_cast<const Dag&>(traj.final) == target);
        REQUIRE(traj.at_t(64).t == 64);
        REQUIRE(traj.at_t(1).t == 1);
    }
}

TEST_CASE("reverse generation under a uniform denoiser is uniform") {
    auto spec = SpaceSpec::synthetic(3, 2, 3);
    auto sch = cosine_schedule(8);
    auto denoiser = uniform_denoiser();
    RngStream rng(35);
    int label_counts[2] = {0, 0};
    std::vector<int> edge_counts(3, 0);
    const int gens = 1000;
    for (int i = 0; i < gens; ++i) {
        Trajectory traj = reverse_generate(denoiser, sch, spec, rng);
        REQUIRE(is_acyclic(traj.final));
        REQUIRE(validate(traj.final, spec).ok());
        for (int v : traj.final.node_labels) ++label_counts[v];
        ++edge_counts[static_cast<std::size_t>(traj.final.edge(0, 1))];
    }
    CHECK(std::abs(label_counts[0] / double(3 * gens) - 0.5) < 0.05);
    CHECK(std::abs(edge_counts[0] / double(gens) - 1.0 / 3) < 0.05);
    CHECK(std::abs(edge_counts[1] / double(gens) - 1.0 / 3) < 0.05);
}

TEST_CASE("reverse generation is deterministic in the seed") {
    auto spec = SpaceSpec::synthetic(4, 2, 3);
    auto sch = cosine_schedule(32);
    auto denoiser = uniform_denoiser();
    RngStream a(77), b(77);
    Trajectory ta = reverse_generate(denoiser, sch, spec, a);
    Trajectory tb = reverse_generate(denoiser, sch, spec, b);
    CHECK(ta.final == tb.final);
    REQUIRE(ta.intermediates.size() == tb.intermediates.size());
    for (std::size_t i = 0; i < ta.intermediates.size(); ++i)
        REQUIRE(ta.intermediates[i] == tb.intermediates[i]);
}

TEST_CASE("noisy graph slot conversion round-trips and validates") {
    auto spec = SpaceSpec::synthetic(4, 2, 3);
    RngStream rng(36);
    for (int rep = 0; rep < 100; ++rep) {
        OrderedDag g = topological_order(random_canonical_dag(rng, 4, 2, 3));
        NoisyGraph slots = NoisyGraph::from_dag(g, spec, 5);
        CHECK(slots.t == 5);
        OrderedDag back = slots.to_dag();
        REQUIRE(static_cast<const Dag&>(back) == static_cast<const Dag&>(g));
    }
    Dag scrambled = Dag::empty(4);
    scrambled.set_edge(2, 1, 1);
    CHECK_THROWS_AS(NoisyGraph::from_dag(scrambled, spec, 1), DimensionMismatch);
    CHECK_THROWS_AS(NoisyGraph::from_dag(Dag::empty(3), spec, 1), DimensionMismatch);
    Dag bad = Dag::empty(4);
    bad.node_labels[0] = 9;
    CHECK_THROWS_AS(NoisyGraph::from_dag(bad, spec, 1), RangeError);
}
