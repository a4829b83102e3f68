#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dagpo/errors.hpp"
#include "dagpo/io.hpp"
#include "dagpo/report.hpp"

using namespace dagpo;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("dagpo_report_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

// Same shortest round-trip encoding the exporter uses.
std::string f(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

Sample make_sample(double acc, double reward) {
    Sample s;
    s.graph = Dag::empty(3);
    s.metrics["acc"] = acc;
    s.metrics["lat"] = 1.0 - acc;
    s.reward = reward;
    return s;
}

// One seed's history: evals at epochs 0 and 2, plain record at epoch 1.
TrainHistory make_history(double base, bool with_crossing) {
    TrainHistory h;
    for (int epoch : {0, 1, 2}) {
        EpochReport rec;
        rec.epoch = epoch;
        rec.mean_reward = base + 0.1 * epoch;
        rec.max_reward = rec.mean_reward + 0.2;
        if (epoch != 1) {
            EvalReport ev;
            ev.epoch = epoch;
            ev.samples = 2;
            ev.mean_acc = base + 0.05 * epoch;
            ev.max_acc = ev.mean_acc + 0.1;
            ev.mean_reward = rec.mean_reward;
            ev.max_reward = rec.max_reward;
            if (with_crossing) ev.crossing = 0.25 + 0.25 * epoch;
            rec.eval = ev;

            SampleSet set;
            set.epoch = epoch;
            set.samples.push_back(make_sample(base, base + 0.01));
            set.samples.push_back(make_sample(base + 0.1, base + 0.11));
            h.eval_samples.push_back(std::move(set));
        }
        h.epochs.push_back(std::move(rec));
    }
    return h;
}

double pop_std(const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return std::sqrt(var / static_cast<double>(xs.size()));
}

} // namespace

TEST_CASE("empty inputs give header-only files") {
    TempDir dir("empty");
    export_report(ReportInputs{}, "acc", dir.str());

    CHECK(read_file((dir.path / "dynamics.csv").string()) ==
          "seed,epoch,mean_acc,max_acc,mean_reward\n");
    CHECK(read_file((dir.path / "crossing.csv").string()) ==
          "seed,epoch,crossing_rate\n");
    CHECK(read_file((dir.path / "pareto.csv").string()) == "seed,epoch\n");

    auto summary =
        nlohmann::json::parse(read_file((dir.path / "summary.json").string()));
    CHECK(summary["schema_version"] == 1);
    CHECK(summary["seeds"].empty());
    CHECK(summary["epochs"].empty());
    CHECK_FALSE(summary.contains("final_epoch"));

    int entries = 0;
    for (const auto& entry : fs::directory_iterator(dir.path)) {
        (void)entry;
        ++entries;
    }
    CHECK(entries == 4); // no distribution files without evaluated epochs
}

TEST_CASE("three-seed fixture round-trips through the csv and json exports") {
    const std::vector<double> bases = {0.2, 0.3, 0.4};
    ReportInputs in;
    in.seeds = {11, 22, 33};
    in.histories = {make_history(bases[0], true), make_history(bases[1], true),
                    make_history(bases[2], false)};
    in.pareto_metrics = {"acc", "lat"};

    TempDir dir("fixture");
    export_report(in, "acc", dir.str());

    SUBCASE("dynamics holds one row per seed per evaluated epoch") {
        std::string expected = "seed,epoch,mean_acc,max_acc,mean_reward\n";
        for (std::size_t i = 0; i < in.seeds.size(); ++i) {
            for (int epoch : {0, 2}) {
                const double mean_acc = bases[i] + 0.05 * epoch;
                expected += std::to_string(in.seeds[i]) + "," +
                            std::to_string(epoch) + "," + f(mean_acc) + "," +
                            f(mean_acc + 0.1) + "," + f(bases[i] + 0.1 * epoch) + "\n";
            }
        }
        CHECK(read_file((dir.path / "dynamics.csv").string()) == expected);
    }

    SUBCASE("crossing rows appear only for seeds that tracked a threshold") {
        CHECK(read_file((dir.path / "crossing.csv").string()) ==
              "seed,epoch,crossing_rate\n"
              "11,0,0.25\n11,2,0.75\n22,0,0.25\n22,2,0.75\n");
    }

    SUBCASE("distribution files list every sample of the epoch") {
        std::string expected = "seed,sample,acc,reward\n";
        for (std::size_t i = 0; i < in.seeds.size(); ++i) {
            const std::string seed = std::to_string(in.seeds[i]);
            expected += seed + ",0," + f(bases[i]) + "," + f(bases[i] + 0.01) + "\n";
            expected +=
                seed + ",1," + f(bases[i] + 0.1) + "," + f(bases[i] + 0.11) + "\n";
        }
        CHECK(read_file((dir.path / "distribution_ep2.csv").string()) == expected);
        CHECK(fs::exists(dir.path / "distribution_ep0.csv"));
        CHECK_FALSE(fs::exists(dir.path / "distribution_ep1.csv"));
    }

    SUBCASE("pareto front comes from each seed's final sample set") {
        // acc and lat sum to 1 per sample, so both samples are non-dominated
        // and the front lists them in ascending acc order.
        std::string expected = "seed,epoch,acc,lat\n";
        for (std::size_t i = 0; i < in.seeds.size(); ++i) {
            const std::string seed = std::to_string(in.seeds[i]);
            const double lo = bases[i], hi = bases[i] + 0.1;
            expected += seed + ",2," + f(lo) + "," + f(1.0 - lo) + "\n";
            expected += seed + ",2," + f(hi) + "," + f(1.0 - hi) + "\n";
        }
        CHECK(read_file((dir.path / "pareto.csv").string()) == expected);
    }

    SUBCASE("summary carries mean and population std across seeds") {
        auto summary =
            nlohmann::json::parse(read_file((dir.path / "summary.json").string()));
        CHECK(summary["final_epoch"] == 2);
        REQUIRE(summary["epochs"].size() == 2);
        const auto& ep2 = summary["epochs"][1];
        CHECK(ep2["epoch"] == 2);
        CHECK(ep2["n_seeds"] == 3);
        std::vector<double> mean_accs, mean_rewards;
        for (double b : bases) {
            mean_accs.push_back(b + 0.05 * 2);
            mean_rewards.push_back(b + 0.1 * 2);
        }
        CHECK(ep2["mean_acc"]["mean"].get<double>() == doctest::Approx(0.4));
        CHECK(ep2["mean_acc"]["std"].get<double>() ==
              doctest::Approx(pop_std(mean_accs)));
        CHECK(ep2["mean_reward"]["std"].get<double>() ==
              doctest::Approx(pop_std(mean_rewards)));
        // Only two seeds tracked crossing; stats cover those two.
        CHECK(ep2["crossing_rate"]["mean"].get<double>() == doctest::Approx(0.75));
        CHECK(ep2["crossing_rate"]["std"].get<double>() == doctest::Approx(0.0));
    }

    SUBCASE("reruns are byte-identical") {
        TempDir again("fixture2");
        export_report(in, "acc", again.str());
        for (const char* name :
             {"dynamics.csv", "crossing.csv", "pareto.csv", "summary.json",
              "distribution_ep0.csv", "distribution_ep2.csv"}) {
            CHECK(read_file((dir.path / name).string()) ==
                  read_file((again.path / name).string()));
        }
    }
}

TEST_CASE("pareto rows need at least two objectives") {
    ReportInputs in;
    in.seeds = {7};
    in.histories = {make_history(0.5, false)};
    in.pareto_metrics = {"acc"};
    TempDir dir("mono");
    export_report(in, "acc", dir.str());
    CHECK(read_file((dir.path / "pareto.csv").string()) == "seed,epoch,acc\n");
}

TEST_CASE("input validation") {
    ReportInputs in;
    in.seeds = {1, 2};
    in.histories = {make_history(0.5, false)};
    TempDir dir("bad");
    CHECK_THROWS_AS(export_report(in, "acc", dir.str()), DimensionMismatch);

    TempDir blocked("blocked");
    fs::create_directories(blocked.path);
    write_file((blocked.path / "occupied").string(), "x");
    CHECK_THROWS_AS(
        export_report(ReportInputs{}, "acc",
                      (blocked.path / "occupied" / "sub").string()),
        IoError);
}
