#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dagpo/checkpoint.hpp"
#include "dagpo/denoiser.hpp"
#include "dagpo/diffusion.hpp"
#include "dagpo/eval.hpp"
#include "dagpo/reward.hpp"
#include "dagpo/rng.hpp"
#include "dagpo/search_space.hpp"

namespace dagpo {

enum class TrainPhase { pretrain, finetune };

// Hyperparameters for one training phase. The factory defaults are the
// reference settings; everything is overridable.
struct TrainConfig {
    TrainPhase phase = TrainPhase::finetune;
    SpaceSpec space = SpaceSpec::synthetic();
    RewardSpec reward = RewardSpec::single(kSyntheticComposite);

    int epochs = 60;
    int batch_size = 15;  // pretrain: minibatch; finetune: rollouts per micro-batch
    double learning_rate = 7e-7;
    int timestep_subsample = 40;    // per-trajectory timestep subset size
    double freeze = 0.75;           // parameter-prefix freeze fraction
    double edge_loss_weight = 5.0;  // lambda in the cross-entropy loss
    int grad_accum = 1;             // micro-batches per optimizer step
    std::uint64_t seed = 42;

    int schedule_T = 800;
    double schedule_s = 0.008;
    int pe_dim = 8;
    int hidden = 256;
    int hidden_layers = 4;
    double weight_decay = 0.01;

    int eval_every = 5;     // periodic sampling cadence in epochs; 0 disables
    int eval_samples = 300;

    // Threshold for dataset filtering and the crossing-rate metric; the id
    // names which per-dataset metric it applies to.
    std::optional<double> filter_threshold;
    std::string filter_dataset = "c10";

    int threads = 0;  // rollout workers; 0 = DAGPO_THREADS env or 1

    static TrainConfig pretrain_defaults(SpaceSpec space);
    static TrainConfig finetune_defaults(SpaceSpec space);

    // Metric id used for eval summaries: the first reward term's dataset.
    const std::string& eval_dataset() const;

    // Throws RangeError on out-of-range fields.
    void check() const;
};

// Summary of one sampling evaluation.
struct EvalReport {
    int epoch = 0;
    int samples = 0;
    double mean_acc = 0.0;
    double max_acc = 0.0;
    std::optional<double> crossing;  // vs filter_threshold, when configured
    double mean_reward = 0.0;
    double max_reward = 0.0;
    std::map<std::string, double> mean_metrics;
};

// One fine-tuning epoch: reward statistics of the K rollouts plus the policy
// gradient loss, and optionally a sampling evaluation.
struct EpochReport {
    int epoch = 0;
    double mean_reward = 0.0;
    double max_reward = 0.0;
    double mean_advantage = 0.0;
    double loss = 0.0;
    std::optional<EvalReport> eval;
};

struct TrainHistory {
    std::vector<EpochReport> epochs;
    std::vector<SampleSet> eval_samples;  // one per evaluated epoch, in order
};

// One JSON object per epoch record:
//   {"epoch":..,"mean_reward":..,"max_reward":..,"mean_advantage":..,"loss":..}
// plus "eval": {"mean_acc","max_acc","mean_reward","max_reward","samples",
// "crossing_rate"} on evaluated epochs (crossing_rate present only when a
// threshold is configured).
std::string history_to_jsonl(const TrainHistory& history);

// Inverse of history_to_jsonl; eval sample sets are not serialized and come
// back empty. Blank lines are skipped. Throws ParseError with an
// "origin:line:" prefix on malformed records.
TrainHistory history_from_jsonl(std::string_view text,
                                const std::string& origin = "<history>");

// Keeps exactly the graphs whose `dataset_id` accuracy is strictly below the
// threshold. Throws MissingEntry when a graph has no table row or lacks the
// metric, EmptyDataset on empty input. Reports kept/total via out-param.
std::vector<OrderedDag> filter_dataset(const std::vector<OrderedDag>& dataset,
                                       const BenchmarkTable& table, double threshold,
                                       const std::string& dataset_id,
                                       double* retained_fraction = nullptr);

// Cross-entropy pretraining: per epoch shuffles the dataset, corrupts each
// minibatch graph at an independent uniform timestep, and steps AdamW on the
// mean denoising loss. Throws EmptyDataset. Appends per-epoch mean loss to
// epoch_losses when given.
Checkpoint pretrain(const std::vector<OrderedDag>& dataset, const TrainConfig& config,
                    std::vector<double>* epoch_losses = nullptr);

// Eager policy-gradient loss over fixed trajectories, each carrying its
// advantage: sum_k (1/K) (T/|S_k|) sum_{t in S_k} A_k * CE(phi(G_t), G_0^k),
// with S_k a fresh uniform without-replacement timestep subset per
// trajectory. Adds the gradient into `grad` and returns the loss. Subsets
// are drawn for every trajectory (rng use is independent of the advantage
// values); zero-advantage trajectories contribute exactly zero. Throws
// RangeError unless 1 <= timestep_subsample <= T.
double dgpo_loss_and_grad(const DenoiserParams& params,
                          std::span<const Trajectory> trajectories, int timestep_subsample,
                          double lambda, RngStream& rng, Gradients& grad);

// One fine-tuning epoch on a live checkpoint: per micro-batch, rolls out
// batch_size trajectories (in parallel when threads > 1; results are
// identical for any worker count), scores finals with the oracle, updates
// the running reward stats before computing advantages, and accumulates the
// eager policy gradient; then applies one optimizer step and bumps the epoch
// counter.
EpochReport dgpo_epoch(Checkpoint& ckpt, const NoiseSchedule& schedule,
                       const RewardOracle& oracle, RewardStats& stats,
                       const TrainConfig& config, RngStream& rng);

// Draws fresh reverse-diffusion samples from the checkpointed model and
// scores them with the oracle. Sample order is independent of worker count.
SampleSet draw_samples(const Checkpoint& ckpt, const RewardOracle& oracle, int count,
                       RngStream& rng, int epoch_tag = 0, int threads = 1);

// Stats of an existing sample set; crossing is computed when a threshold is
// given.
EvalReport summarize_samples(const SampleSet& s, const std::string& acc_dataset,
                             std::optional<double> threshold);

struct FinetuneResult {
    Checkpoint checkpoint;
    TrainHistory history;
};

// Freezes the configured parameter prefix, then runs config.epochs
// fine-tuning epochs with periodic sampling evaluations (always including an
// epoch-0 baseline and the final epoch). Zero epochs returns the input
// checkpoint untouched.
FinetuneResult finetune(const Checkpoint& start, const RewardOracle& oracle,
                        const TrainConfig& config);

} // namespace dagpo
