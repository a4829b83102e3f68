#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "dagpo/config.hpp"
#include "dagpo/errors.hpp"
#include "dagpo/io.hpp"

using namespace dagpo;

TEST_CASE("defaults match the fine-tuning reference settings") {
    RunConfig c;
    CHECK(c.train.phase == TrainPhase::finetune);
    CHECK(c.train.space.name == "synthetic");
    CHECK(c.train.epochs == 60);
    CHECK(c.train.batch_size == 15);
    CHECK(c.train.learning_rate == doctest::Approx(7e-7));
    CHECK(c.out_dir == "out");
    CHECK(c.train.reward.terms.size() == 1);
    CHECK(c.train.reward.terms[0].dataset == kSyntheticComposite);
}

TEST_CASE("a full config file parses field by field") {
    const std::string text = R"(# run settings
space = nb201
phase = finetune

reward.mode = multi_objective
reward.datasets = c10, c100, in16
reward.weights = 0.5,0.3,0.2
reward.lo = 0,0,0
reward.hi = 1,1,0.5

epochs = 12
batch_size = 8
learning_rate = 0.001
timestep_subsample = 10
freeze = 0.5
edge_loss_weight = 2.5
grad_accum = 2
seed = 7
schedule.T = 100
schedule.s = 0.01
pe_dim = 4
hidden = 32
hidden_layers = 2
weight_decay = 0.02
eval.every = 3
eval.samples = 50
threads = 2
filter.threshold = 0.85
filter.dataset = c10

paths.dataset = data/train.jsonl
paths.table = data/table.jsonl
paths.checkpoint = runs/pre/checkpoint.bin
paths.out = runs/ft
)";
    const RunConfig c = RunConfig::from_text(text, "test.cfg");
    CHECK(c.train.space.name == "nb201");
    CHECK(c.train.space.max_nodes == 4);
    CHECK(c.train.reward.mode == RewardMode::multi_objective);
    REQUIRE(c.train.reward.terms.size() == 3);
    CHECK(c.train.reward.terms[1].dataset == "c100");
    CHECK(c.train.reward.terms[1].weight == doctest::Approx(0.3));
    CHECK(c.train.reward.terms[2].hi == doctest::Approx(0.5));
    CHECK(c.train.epochs == 12);
    CHECK(c.train.batch_size == 8);
    CHECK(c.train.learning_rate == doctest::Approx(1e-3));
    CHECK(c.train.timestep_subsample == 10);
    CHECK(c.train.freeze == doctest::Approx(0.5));
    CHECK(c.train.edge_loss_weight == doctest::Approx(2.5));
    CHECK(c.train.grad_accum == 2);
    CHECK(c.train.seed == 7);
    CHECK(c.train.schedule_T == 100);
    CHECK(c.train.schedule_s == doctest::Approx(0.01));
    CHECK(c.train.pe_dim == 4);
    CHECK(c.train.hidden == 32);
    CHECK(c.train.hidden_layers == 2);
    CHECK(c.train.weight_decay == doctest::Approx(0.02));
    CHECK(c.train.eval_every == 3);
    CHECK(c.train.eval_samples == 50);
    CHECK(c.train.threads == 2);
    REQUIRE(c.train.filter_threshold.has_value());
    CHECK(*c.train.filter_threshold == doctest::Approx(0.85));
    CHECK(c.train.filter_dataset == "c10");
    CHECK(c.dataset_path == "data/train.jsonl");
    CHECK(c.table_path == "data/table.jsonl");
    CHECK(c.checkpoint_path == "runs/pre/checkpoint.bin");
    CHECK(c.out_dir == "runs/ft");
}

TEST_CASE("phase switches reset the phase-dependent hyperparameters") {
    RunConfig c;
    c.set("phase", "pretrain");
    CHECK(c.train.phase == TrainPhase::pretrain);
    CHECK(c.train.epochs == 200);
    CHECK(c.train.batch_size == 64);
    CHECK(c.train.learning_rate == doctest::Approx(3e-4));

    // Overrides placed after the phase key survive.
    const RunConfig c2 =
        RunConfig::from_text("phase = pretrain\nepochs = 5\n", "t");
    CHECK(c2.train.phase == TrainPhase::pretrain);
    CHECK(c2.train.epochs == 5);
    CHECK(c2.train.batch_size == 64);
}

TEST_CASE("synthetic space dimensions are adjustable") {
    RunConfig c;
    c.set("space.nodes", "7");
    c.set("space.edge_cats", "2");
    CHECK(c.train.space.max_nodes == 7);
    CHECK(c.train.space.node_cats == 2);
    CHECK(c.train.space.edge_cats == 2);

    c.set("space", "nb101");
    CHECK_THROWS_AS(c.set("space.nodes", "9"), KeyError);
    c.set("space", "synthetic");
    CHECK(c.train.space.max_nodes == 5); // named space reset the dims
    CHECK_THROWS_AS(c.set("space.nodes", "0"), RangeError);
    CHECK_THROWS_AS(c.set("space", "nb999"), Error);
}

TEST_CASE("the serialized form parses back to the same config") {
    RunConfig c;
    c.set("space.nodes", "6");
    c.set("phase", "finetune");
    c.set("reward.datasets", "depth,pref");
    c.set("reward.weights", "0.75,0.25");
    c.set("reward.mode", "multi_objective");
    c.set("learning_rate", "0.0025");
    c.set("filter.threshold", "0.4");
    c.set("filter.dataset", "depth");
    c.set("paths.out", "runs/x");
    c.set("seed", "18446744073709551615"); // uint64 max survives

    const std::string text = c.to_text();
    const RunConfig back = RunConfig::from_text(text, "archived");
    CHECK(back.to_text() == text);
    CHECK(back.train.space.max_nodes == 6);
    CHECK(back.train.reward.terms.size() == 2);
    CHECK(back.train.reward.terms[0].weight == doctest::Approx(0.75));
    CHECK(back.train.seed == 18446744073709551615ull);
    REQUIRE(back.train.filter_threshold.has_value());
    CHECK(*back.train.filter_threshold == doctest::Approx(0.4));

    // Threshold reset round-trips as key absence.
    c.set("filter.threshold", "none");
    const RunConfig back2 = RunConfig::from_text(c.to_text(), "archived");
    CHECK_FALSE(back2.train.filter_threshold.has_value());
}

TEST_CASE("errors carry the origin, line number and offending key") {
    auto check_message = [](const std::string& text, const std::string& needle) {
        try {
            (void)RunConfig::from_text(text, "run.cfg");
            FAIL("expected a parse failure for: " << text);
        } catch (const ParseError& e) {
            const std::string msg = e.what();
            CHECK(msg.find(needle) != std::string::npos);
        }
    };
    check_message("epochs = 3\nnot a line\n", "run.cfg:2:");
    check_message("bogus_key = 1\n", "bogus_key");
    check_message("epochs = twelve\n", "epochs");
    check_message("reward.weights = 1,2\n", "reward.datasets");
    check_message("reward.datasets = a,,b\n", "empty list item");
    check_message("= 3\n", "empty key");
    check_message("phase = warmup\n", "phase");
    check_message("reward.mode = sideways\n", "reward.mode");

    CHECK_THROWS_AS(RunConfig::from_file("/nonexistent/run.cfg"), IoError);
}

TEST_CASE("flag-style overrides win over the file") {
    RunConfig c = RunConfig::from_text("seed = 1\nepochs = 4\n", "f");
    c.set("seed", "99"); // what a --seed flag does
    CHECK(c.train.seed == 99);
    CHECK(c.train.epochs == 4);
}

TEST_CASE("archive writes a loadable config next to the outputs") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() /
                         ("dagpo_config_archive_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    RunConfig c;
    c.set("seed", "123");
    c.archive(dir.string());
    const RunConfig back = RunConfig::from_file((dir / "config.effective").string());
    CHECK(back.train.seed == 123);
    CHECK(back.to_text() == c.to_text());
    fs::remove_all(dir);
}
