#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dagpo/checkpoint.hpp"
#include "dagpo/config.hpp"
#include "dagpo/errors.hpp"
#include "dagpo/eval.hpp"
#include "dagpo/io.hpp"
#include "dagpo/report.hpp"
#include "dagpo/reward.hpp"
#include "dagpo/rng.hpp"
#include "dagpo/search_space.hpp"
#include "dagpo/training.hpp"

namespace fs = std::filesystem;
using namespace dagpo;

namespace {

// 2: configuration problem; 3: dataset/table/sample-file problem;
// 4: checkpoint problem. Anything unforeseen exits 1.
constexpr int kOk = 0;
constexpr int kUnexpected = 1;
constexpr int kBadConfig = 2;
constexpr int kBadData = 3;
constexpr int kBadCheckpoint = 4;

int fail(int code, const std::string& message) {
    std::cerr << "dagpo: error: " << message << "\n";
    return code;
}

// Flag values; strings so overrides flow through RunConfig::set and share its
// validation messages.
struct Flags {
    std::string config_path;
    std::optional<std::string> seed, space, out, dataset, table, checkpoint;
    std::optional<std::string> epochs, lr, threads, weights, threshold;
    bool inverse = false;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config_path, "key=value run config file");
    cmd->add_option("--seed", f.seed, "master rng seed");
    cmd->add_option("--space", f.space, "search space: synthetic, nb101 or nb201");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--dataset", f.dataset, "graph dataset path (JSON lines)");
    cmd->add_option("--table", f.table, "benchmark table path (JSON lines)");
    cmd->add_option("--checkpoint", f.checkpoint, "input checkpoint path");
    cmd->add_option("--epochs", f.epochs, "training epochs");
    cmd->add_option("--lr", f.lr, "learning rate");
    cmd->add_option("--threads", f.threads, "rollout worker threads");
    cmd->add_option("--threshold", f.threshold, "accuracy threshold (filter/crossing)");
}

// File first, then flags; the subcommand pins the phase before any scalar
// flag so explicit overrides survive the phase reset.
RunConfig build_run(const Flags& f, TrainPhase phase) {
    RunConfig run =
        f.config_path.empty() ? RunConfig{} : RunConfig::from_file(f.config_path);
    if (run.train.phase != phase) {
        run.set("phase", phase == TrainPhase::pretrain ? "pretrain" : "finetune");
    }
    if (f.space) run.set("space", *f.space);
    if (f.seed) run.set("seed", *f.seed);
    if (f.epochs) run.set("epochs", *f.epochs);
    if (f.lr) run.set("learning_rate", *f.lr);
    if (f.threads) run.set("threads", *f.threads);
    if (f.threshold) run.set("filter.threshold", *f.threshold);
    if (f.weights) {
        run.set("reward.weights", *f.weights);
        const auto n = static_cast<std::size_t>(
            std::count(f.weights->begin(), f.weights->end(), ',') + 1);
        if (n >= 2) {
            if (f.inverse) {
                throw ParseError("--inverse cannot combine with multi-objective --weights");
            }
            run.set("reward.mode", "multi_objective");
        }
    }
    if (f.inverse) run.set("reward.mode", "inverse");
    if (f.dataset) run.set("paths.dataset", *f.dataset);
    if (f.table) run.set("paths.table", *f.table);
    if (f.checkpoint) run.set("paths.checkpoint", *f.checkpoint);
    if (f.out) run.set("paths.out", *f.out);
    run.train.check();
    run.train.reward.check();
    return run;
}

// The oracle for a run: table-backed when paths.table is set, synthetic
// otherwise. The table is owned by the caller and must outlive the oracle.
RewardOracle build_oracle(const RunConfig& run, std::optional<BenchmarkTable>& table) {
    if (!run.table_path.empty()) {
        table = load_benchmark(run.table_path, run.train.space);
        return make_tabular_oracle(*table, run.train.reward);
    }
    return make_synthetic_oracle(run.train.reward);
}

std::string path_under(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

int cmd_pretrain(const Flags& f) {
    RunConfig run;
    try {
        run = build_run(f, TrainPhase::pretrain);
        if (run.dataset_path.empty()) {
            throw KeyError("paths.dataset is required for pretraining");
        }
    } catch (const Error& e) {
        return fail(kBadConfig, e.what());
    }

    std::vector<OrderedDag> dataset;
    try {
        dataset = read_dataset(run.dataset_path);
    } catch (const Error& e) {
        return fail(kBadData, e.what());
    }

    try {
        std::vector<double> losses;
        const Checkpoint ck = pretrain(dataset, run.train, &losses);
        run.archive(run.out_dir);
        save_checkpoint(ck, path_under(run.out_dir, "checkpoint.bin"));
        std::string history;
        for (std::size_t i = 0; i < losses.size(); ++i) {
            nlohmann::ordered_json j;
            j["epoch"] = i + 1;
            j["loss"] = losses[i];
            history += j.dump() + "\n";
        }
        write_file(path_under(run.out_dir, "history.jsonl"), history);
        std::cout << "pretrained " << run.train.epochs << " epochs on "
                  << dataset.size() << " graphs";
        if (!losses.empty()) std::cout << ", final loss " << losses.back();
        std::cout << "\ncheckpoint: " << path_under(run.out_dir, "checkpoint.bin")
                  << "\n";
        return kOk;
    } catch (const Error& e) {
        return fail(kBadCheckpoint, e.what());
    }
}

int cmd_finetune(const Flags& f) {
    RunConfig run;
    try {
        run = build_run(f, TrainPhase::finetune);
        if (run.checkpoint_path.empty()) {
            throw KeyError("paths.checkpoint is required for fine-tuning");
        }
    } catch (const Error& e) {
        return fail(kBadConfig, e.what());
    }

    Checkpoint start;
    try {
        start = load_checkpoint(run.checkpoint_path);
    } catch (const Error& e) {
        return fail(kBadCheckpoint, e.what());
    }
    // The checkpoint owns the space and schedule; the config follows it.
    run.train.space = start.space;
    if (run.train.timestep_subsample > start.schedule_T) {
        return fail(kBadConfig, "timestep_subsample " +
                                    std::to_string(run.train.timestep_subsample) +
                                    " exceeds the checkpoint's schedule T " +
                                    std::to_string(start.schedule_T));
    }

    std::optional<BenchmarkTable> table;
    RewardOracle oracle;
    try {
        oracle = build_oracle(run, table);
    } catch (const Error& e) {
        return fail(kBadData, e.what());
    }

    try {
        const FinetuneResult result = finetune(start, oracle, run.train);
        run.archive(run.out_dir);
        save_checkpoint(result.checkpoint, path_under(run.out_dir, "checkpoint.bin"));
        write_file(path_under(run.out_dir, "history.jsonl"),
                   history_to_jsonl(result.history));

        ReportInputs report;
        report.seeds = {run.train.seed};
        report.histories = {result.history};
        if (run.train.reward.mode == RewardMode::multi_objective) {
            for (const auto& term : run.train.reward.terms) {
                report.pareto_metrics.push_back(term.dataset);
            }
        }
        export_report(report, run.train.eval_dataset(), run.out_dir);

        std::cout << "finetuned " << run.train.epochs << " epochs, seed "
                  << run.train.seed << "\n";
        for (const auto& rec : result.history.epochs) {
            if (!rec.eval) continue;
            std::cout << "epoch " << rec.epoch << ": mean_acc " << rec.eval->mean_acc
                      << ", mean_reward " << rec.eval->mean_reward;
            if (rec.eval->crossing) std::cout << ", crossing " << *rec.eval->crossing;
            std::cout << "\n";
        }
        std::cout << "outputs: " << run.out_dir << "\n";
        return kOk;
    } catch (const Error& e) {
        return fail(kBadCheckpoint, e.what());
    }
}

int cmd_sample(const Flags& f, int n) {
    RunConfig run;
    try {
        run = build_run(f, TrainPhase::finetune);
        if (run.checkpoint_path.empty()) {
            throw KeyError("paths.checkpoint is required for sampling");
        }
        if (n < 0) throw RangeError("--n must be >= 0");
    } catch (const Error& e) {
        return fail(kBadConfig, e.what());
    }

    Checkpoint ck;
    try {
        ck = load_checkpoint(run.checkpoint_path);
    } catch (const Error& e) {
        return fail(kBadCheckpoint, e.what());
    }
    run.train.space = ck.space;

    std::optional<BenchmarkTable> table;
    RewardOracle oracle;
    try {
        if (!run.table_path.empty()) {
            oracle = build_oracle(run, table);
        }
    } catch (const Error& e) {
        return fail(kBadData, e.what());
    }

    try {
        std::string out;
        if (n > 0) {
            RngStream rng = RngStream::substream(run.train.seed, "sample", 0);
            const RewardOracle scorer =
                table.has_value()
                    ? oracle
                    : RewardOracle{[](const Dag&) { return 0.0; },
                                   [](const Dag&) {
                                       return std::map<std::string, double>{};
                                   }};
            const SampleSet set =
                draw_samples(ck, scorer, n, rng, 0, std::max(1, run.train.threads));
            for (const Sample& s : set.samples) {
                if (table.has_value()) {
                    nlohmann::ordered_json j;
                    j["dag"] = nlohmann::json::parse(to_json(s.graph));
                    j["reward"] = s.reward;
                    j["metrics"] = s.metrics;
                    out += j.dump() + "\n";
                } else {
                    out += to_json(s.graph) + "\n";
                }
            }
        }
        const std::string path = path_under(run.out_dir, "samples.jsonl");
        std::error_code ec;
        fs::create_directories(run.out_dir, ec);
        if (ec) throw IoError("cannot create '" + run.out_dir + "': " + ec.message());
        write_file(path, out);
        std::cout << "wrote " << n << " samples to " << path << "\n";
        return kOk;
    } catch (const Error& e) {
        return fail(kUnexpected, e.what());
    }
}

int cmd_filter(const Flags& f) {
    RunConfig run;
    try {
        run = build_run(f, TrainPhase::pretrain);
        if (run.table_path.empty()) {
            throw KeyError("paths.table is required for filtering");
        }
        if (!run.train.filter_threshold.has_value()) {
            throw KeyError("filter.threshold (--threshold) is required for filtering");
        }
    } catch (const Error& e) {
        return fail(kBadConfig, e.what());
    }

    try {
        const BenchmarkTable table = load_benchmark(run.table_path, run.train.space);
        std::vector<OrderedDag> dataset;
        if (!run.dataset_path.empty()) {
            dataset = read_dataset(run.dataset_path);
        } else {
            // No dataset file: filter the table's own architectures.
            std::vector<std::string> keys;
            keys.reserve(table.entries.size());
            for (const auto& [key, metrics] : table.entries) keys.push_back(key);
            std::sort(keys.begin(), keys.end());
            for (const auto& key : keys) {
                dataset.push_back(topological_order(arch_key_to_dag(key, run.train.space)));
            }
            if (dataset.empty()) throw EmptyDataset("filter: the table has no entries");
        }
        double retained = 0.0;
        const std::vector<OrderedDag> kept =
            filter_dataset(dataset, table, *run.train.filter_threshold,
                           run.train.filter_dataset, &retained);
        std::error_code ec;
        fs::create_directories(run.out_dir, ec);
        if (ec) throw IoError("cannot create '" + run.out_dir + "': " + ec.message());
        const std::string path = path_under(run.out_dir, "filtered.jsonl");
        write_dataset(path, kept);
        char line[128];
        std::snprintf(line, sizeof(line), "retained %.4f (%zu/%zu)", retained,
                      kept.size(), dataset.size());
        std::cout << line << "\n" << path << "\n";
        return kOk;
    } catch (const Error& e) {
        return fail(kBadData, e.what());
    }
}

// A sample file line is either a bare Dag object or {"dag":..,"reward":..,
// "metrics":{..}}; rewards and metrics are optional.
SampleSet parse_samples(const std::string& path) {
    SampleSet set;
    const std::vector<std::string> lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::string where = path + ":" + std::to_string(i + 1) + ": ";
        nlohmann::json j = nlohmann::json::parse(lines[i], nullptr, false);
        if (j.is_discarded()) throw ParseError(where + "malformed JSON");
        Sample s;
        try {
            if (j.is_object() && j.contains("dag")) {
                s.graph = dag_from_json(j["dag"].dump());
                if (j.contains("reward")) s.reward = j["reward"].get<double>();
                if (j.contains("metrics")) {
                    for (const auto& [id, v] : j["metrics"].items()) {
                        s.metrics[id] = v.get<double>();
                    }
                }
            } else {
                s.graph = dag_from_json(lines[i]);
            }
        } catch (const Error& e) {
            throw ParseError(where + e.what());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(where + e.what());
        }
        set.samples.push_back(std::move(s));
    }
    return set;
}

int evaluate_samples(const RunConfig& run, const std::string& input) {
    SampleSet set;
    std::optional<BenchmarkTable> table;
    try {
        set = parse_samples(input);
        // Score on the spot when the file carries no metrics of its own.
        bool unscored = true;
        for (const auto& s : set.samples) unscored = unscored && s.metrics.empty();
        if (unscored && !set.samples.empty()) {
            RewardOracle oracle = build_oracle(run, table);
            for (auto& s : set.samples) {
                s.reward = oracle.reward(s.graph);
                s.metrics = oracle.metrics(s.graph);
            }
        }
    } catch (const Error& e) {
        return fail(kBadData, e.what());
    }

    nlohmann::ordered_json summary;
    summary["input"] = input;
    summary["samples"] = set.samples.size();
    std::cout << "samples: " << set.samples.size() << "\n";
    if (!set.samples.empty()) {
        const std::string acc_id = run.train.eval_dataset();
        const EvalReport rep =
            summarize_samples(set, acc_id, run.train.filter_threshold);
        summary["acc_dataset"] = acc_id;
        summary["mean_acc"] = rep.mean_acc;
        summary["max_acc"] = rep.max_acc;
        summary["mean_reward"] = rep.mean_reward;
        summary["max_reward"] = rep.max_reward;
        std::cout << "mean_acc " << rep.mean_acc << ", max_acc " << rep.max_acc
                  << ", mean_reward " << rep.mean_reward << "\n";
        if (rep.crossing) {
            summary["threshold"] = *run.train.filter_threshold;
            summary["crossing_rate"] = *rep.crossing;
            std::cout << "crossing rate at " << *run.train.filter_threshold << ": "
                      << *rep.crossing << "\n";
        }

        std::vector<double> pool;
        for (const auto& s : set.samples) pool.push_back(s.reward);
        RngStream rng = RngStream::substream(run.train.seed, "bootstrap", 0);
        const double emax =
            bootstrap_extreme(pool, 15, 10000, ExtremeMode::max, rng);
        summary["bootstrap_expected_max_of_15"] = emax;
        std::cout << "bootstrap E[max reward of 15] = " << emax << "\n";

        if (run.train.reward.terms.size() >= 2) {
            std::vector<std::string> ids;
            for (const auto& t : run.train.reward.terms) ids.push_back(t.dataset);
            try {
                const ParetoFront front = pareto_extract(set, ids);
                summary["pareto_points"] = front.points.size();
                summary["hypervolume"] = hypervolume(front);
                std::cout << "pareto front: " << front.points.size()
                          << " points, hypervolume " << hypervolume(front) << "\n";
            } catch (const Error& e) {
                std::cout << "pareto skipped: " << e.what() << "\n";
            }
        }
    }

    try {
        std::error_code ec;
        fs::create_directories(run.out_dir, ec);
        if (ec) throw IoError("cannot create '" + run.out_dir + "': " + ec.message());
        write_file(path_under(run.out_dir, "evaluate.json"), summary.dump(2) + "\n");
    } catch (const Error& e) {
        return fail(kUnexpected, e.what());
    }
    return kOk;
}

int evaluate_histories(const RunConfig& run, const std::string& input) {
    ReportInputs report;
    try {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(input)) {
            if (entry.path().extension() == ".jsonl") {
                files.push_back(entry.path().string());
            }
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) {
            throw EmptyDataset("no .jsonl history files under '" + input + "'");
        }
        for (std::size_t i = 0; i < files.size(); ++i) {
            report.histories.push_back(history_from_jsonl(read_file(files[i]), files[i]));
            report.seeds.push_back(i);
        }
    } catch (const Error& e) {
        return fail(kBadData, e.what());
    }

    try {
        export_report(report, run.train.eval_dataset(), run.out_dir);
    } catch (const Error& e) {
        return fail(kUnexpected, e.what());
    }

    // Echo the cross-seed stats of the last evaluated epoch.
    const nlohmann::json summary = nlohmann::json::parse(
        read_file(path_under(run.out_dir, "summary.json")));
    std::cout << "histories: " << report.histories.size() << "\n";
    if (summary.contains("final_epoch")) {
        const auto& epochs = summary["epochs"];
        const auto& last = epochs[epochs.size() - 1];
        std::cout << "final epoch " << summary["final_epoch"] << ": mean_acc "
                  << last["mean_acc"]["mean"] << " +/- " << last["mean_acc"]["std"]
                  << ", mean_reward " << last["mean_reward"]["mean"] << " +/- "
                  << last["mean_reward"]["std"] << "\n";
    }
    std::cout << "summary: " << path_under(run.out_dir, "summary.json") << "\n";
    return kOk;
}

int cmd_evaluate(const Flags& f, const std::string& input) {
    RunConfig run;
    try {
        run = build_run(f, TrainPhase::finetune);
    } catch (const Error& e) {
        return fail(kBadConfig, e.what());
    }
    std::error_code ec;
    if (fs::is_directory(input, ec)) return evaluate_histories(run, input);
    if (!fs::exists(input, ec)) {
        return fail(kBadData, "input '" + input + "' does not exist");
    }
    return evaluate_samples(run, input);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diffusion-based DAG generation with reward-guided fine-tuning"};
    app.require_subcommand(1);

    Flags pre_f, ft_f, sample_f, filter_f, eval_f;
    int sample_n = 100;
    std::string eval_input;

    CLI::App* pre = app.add_subcommand(
        "pretrain", "Train the denoiser on a dataset of graphs");
    add_common(pre, pre_f);

    CLI::App* ft = app.add_subcommand(
        "finetune", "Reward-guided fine-tuning from a checkpoint");
    add_common(ft, ft_f);
    ft->add_flag("--inverse", ft_f.inverse, "minimize the reward instead");
    ft->add_option("--weights", ft_f.weights,
                   "comma list of reward weights; two or more switch to "
                   "multi-objective");

    CLI::App* sample = app.add_subcommand(
        "sample", "Draw graphs from a checkpointed model");
    add_common(sample, sample_f);
    sample->add_option("--n", sample_n, "number of samples")
        ->check(CLI::NonNegativeNumber);

    CLI::App* filter = app.add_subcommand(
        "filter", "Keep graphs whose accuracy is below a threshold");
    add_common(filter, filter_f);

    CLI::App* eval = app.add_subcommand(
        "evaluate", "Summarize a sample file or a directory of histories");
    add_common(eval, eval_f);
    eval->add_option("input", eval_input, "sample file or history directory")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kBadConfig;
    }

    try {
        if (app.got_subcommand(pre)) return cmd_pretrain(pre_f);
        if (app.got_subcommand(ft)) return cmd_finetune(ft_f);
        if (app.got_subcommand(sample)) return cmd_sample(sample_f, sample_n);
        if (app.got_subcommand(filter)) return cmd_filter(filter_f);
        if (app.got_subcommand(eval)) return cmd_evaluate(eval_f, eval_input);
    } catch (const std::exception& e) {
        return fail(kUnexpected, e.what());
    }
    return kUnexpected;
}
