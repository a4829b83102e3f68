#include "dagpo/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include <json.hpp>

#include "dagpo/errors.hpp"
#include "dagpo/eval.hpp"
#include "dagpo/io.hpp"

namespace dagpo {
namespace {

// Shortest round-trip decimal form; stable across runs.
std::string fmt(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct Stat {
    double mean = 0.0;
    double std = 0.0;
};

// Population statistics; shifted sums keep equal inputs exact.
Stat stat_of(const std::vector<double>& xs) {
    Stat s;
    if (xs.empty()) return s;
    const double shift = xs.front();
    double acc = 0.0;
    for (double x : xs) acc += x - shift;
    s.mean = shift + acc / static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(var / static_cast<double>(xs.size()));
    return s;
}

const EvalReport* eval_at(const TrainHistory& h, int epoch) {
    for (const auto& rec : h.epochs) {
        if (rec.epoch == epoch && rec.eval.has_value()) return &*rec.eval;
    }
    return nullptr;
}

const SampleSet* samples_at(const TrainHistory& h, int epoch) {
    for (const auto& s : h.eval_samples) {
        if (s.epoch == epoch) return &s;
    }
    return nullptr;
}

void write_text(const std::filesystem::path& dir, const std::string& name,
                const std::string& body) {
    write_file((dir / name).string(), body);
}

} // namespace

void export_report(const ReportInputs& inputs, const std::string& acc_dataset,
                   const std::string& out_dir) {
    if (inputs.seeds.size() != inputs.histories.size()) {
        throw DimensionMismatch("report: " + std::to_string(inputs.seeds.size()) +
                                " seeds for " +
                                std::to_string(inputs.histories.size()) + " histories");
    }
    const std::filesystem::path dir(out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("report: cannot create '" + out_dir + "': " + ec.message());

    // Sorted union of evaluated epochs across all seeds.
    std::set<int> eval_epochs;
    for (const auto& h : inputs.histories) {
        for (const auto& rec : h.epochs) {
            if (rec.eval.has_value()) eval_epochs.insert(rec.epoch);
        }
    }

    const std::size_t n_seeds = inputs.seeds.size();

    std::string dynamics = "seed,epoch,mean_acc,max_acc,mean_reward\n";
    std::string crossing = "seed,epoch,crossing_rate\n";
    for (std::size_t i = 0; i < n_seeds; ++i) {
        const std::string seed = std::to_string(inputs.seeds[i]);
        for (int epoch : eval_epochs) {
            const EvalReport* ev = eval_at(inputs.histories[i], epoch);
            if (ev == nullptr) continue;
            dynamics += seed + "," + std::to_string(epoch) + "," + fmt(ev->mean_acc) +
                        "," + fmt(ev->max_acc) + "," + fmt(ev->mean_reward) + "\n";
            if (ev->crossing.has_value()) {
                crossing += seed + "," + std::to_string(epoch) + "," +
                            fmt(*ev->crossing) + "\n";
            }
        }
    }
    write_text(dir, "dynamics.csv", dynamics);
    write_text(dir, "crossing.csv", crossing);

    for (int epoch : eval_epochs) {
        std::string body = "seed,sample,acc,reward\n";
        for (std::size_t i = 0; i < n_seeds; ++i) {
            const SampleSet* set = samples_at(inputs.histories[i], epoch);
            if (set == nullptr) continue;
            const std::string seed = std::to_string(inputs.seeds[i]);
            for (std::size_t k = 0; k < set->samples.size(); ++k) {
                const Sample& s = set->samples[k];
                auto it = s.metrics.find(acc_dataset);
                const double acc = it == s.metrics.end() ? 0.0 : it->second;
                body += seed + "," + std::to_string(k) + "," + fmt(acc) + "," +
                        fmt(s.reward) + "\n";
            }
        }
        write_text(dir, "distribution_ep" + std::to_string(epoch) + ".csv", body);
    }

    std::string pareto = "seed,epoch";
    for (const auto& id : inputs.pareto_metrics) pareto += "," + id;
    pareto += "\n";
    if (inputs.pareto_metrics.size() >= 2) {
        for (std::size_t i = 0; i < n_seeds; ++i) {
            const auto& sets = inputs.histories[i].eval_samples;
            if (sets.empty()) continue;
            const SampleSet& last = sets.back();
            ParetoFront front;
            try {
                front = pareto_extract(last, inputs.pareto_metrics);
            } catch (const EmptyPool&) {
                continue; // no sample carries every objective
            }
            for (const auto& pt : front.points) {
                std::string row =
                    std::to_string(inputs.seeds[i]) + "," + std::to_string(last.epoch);
                for (double v : pt) row += "," + fmt(v);
                pareto += row + "\n";
            }
        }
    }
    write_text(dir, "pareto.csv", pareto);

    nlohmann::ordered_json summary;
    summary["schema_version"] = 1;
    summary["acc_dataset"] = acc_dataset;
    summary["seeds"] = inputs.seeds;
    summary["epochs"] = nlohmann::ordered_json::array();
    for (int epoch : eval_epochs) {
        std::vector<double> mean_accs, max_accs, mean_rewards, crossings;
        for (const auto& h : inputs.histories) {
            const EvalReport* ev = eval_at(h, epoch);
            if (ev == nullptr) continue;
            mean_accs.push_back(ev->mean_acc);
            max_accs.push_back(ev->max_acc);
            mean_rewards.push_back(ev->mean_reward);
            if (ev->crossing.has_value()) crossings.push_back(*ev->crossing);
        }
        nlohmann::ordered_json rec;
        rec["epoch"] = epoch;
        rec["n_seeds"] = mean_accs.size();
        auto put = [&rec](const char* key, const std::vector<double>& xs) {
            const Stat s = stat_of(xs);
            rec[key] = {{"mean", s.mean}, {"std", s.std}};
        };
        put("mean_acc", mean_accs);
        put("max_acc", max_accs);
        put("mean_reward", mean_rewards);
        if (!crossings.empty()) put("crossing_rate", crossings);
        summary["epochs"].push_back(std::move(rec));
    }
    if (!eval_epochs.empty()) summary["final_epoch"] = *eval_epochs.rbegin();
    write_text(dir, "summary.json", summary.dump(2) + "\n");
}

} // namespace dagpo
