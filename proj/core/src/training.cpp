#include "dagpo/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "dagpo/errors.hpp"

namespace dagpo {

namespace {

int resolve_threads(int configured) {
    if (configured > 0) return configured;
    if (const char* env = std::getenv("DAGPO_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1 && v <= 256) return static_cast<int>(v);
    }
    return 1;
}

AdamWConfig optimizer_config(const TrainConfig& config) {
    AdamWConfig cfg;
    cfg.weight_decay = config.weight_decay;
    return cfg;
}

// Rollout results are written by index, so the trajectory set is identical
// for any worker count: the per-rollout seeds are drawn sequentially first.
std::vector<Trajectory> roll_trajectories(const DenoiserFn& fn, const NoiseSchedule& schedule,
                                          const SpaceSpec& space, int count, RngStream& rng,
                                          int threads) {
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(count));
    for (auto& s : seeds) s = rng.next_u64();
    std::vector<Trajectory> out(static_cast<std::size_t>(count));
    auto work = [&](int begin, int end) {
        for (int k = begin; k < end; ++k) {
            RngStream sub(seeds[static_cast<std::size_t>(k)]);
            out[static_cast<std::size_t>(k)] = reverse_generate(fn, schedule, space, sub);
        }
    };
    int workers = std::min(threads, count);
    if (workers <= 1) {
        work(0, count);
        return out;
    }
    std::vector<std::thread> pool;
    int per = (count + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        int begin = w * per;
        int end = std::min(count, begin + per);
        if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (auto& t : pool) t.join();
    return out;
}

} // namespace

TrainConfig TrainConfig::pretrain_defaults(SpaceSpec space) {
    TrainConfig c;
    c.phase = TrainPhase::pretrain;
    c.space = std::move(space);
    c.epochs = 200;
    c.batch_size = 64;
    c.learning_rate = 3e-4;
    return c;
}

TrainConfig TrainConfig::finetune_defaults(SpaceSpec space) {
    TrainConfig c;
    c.space = std::move(space);
    return c;
}

const std::string& TrainConfig::eval_dataset() const {
    if (reward.terms.empty()) throw RangeError("config has no reward terms");
    return reward.terms.front().dataset;
}

void TrainConfig::check() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw RangeError(std::string("config: ") + what);
    };
    require(epochs >= 0, "epochs must be >= 0");
    require(batch_size >= 1, "batch size must be >= 1");
    require(std::isfinite(learning_rate) && learning_rate > 0.0, "learning rate must be > 0");
    require(timestep_subsample >= 1, "timestep subsample must be >= 1");
    require(freeze >= 0.0 && freeze <= 1.0, "freeze fraction must be in [0,1]");
    require(edge_loss_weight >= 0.0, "edge loss weight must be >= 0");
    require(grad_accum >= 1, "grad accumulation must be >= 1");
    require(schedule_T >= 1, "schedule T must be >= 1");
    require(schedule_s > 0.0, "schedule s must be > 0");
    require(hidden >= 1, "hidden width must be >= 1");
    require(hidden_layers >= 1, "hidden depth must be >= 1");
    require(weight_decay >= 0.0, "weight decay must be >= 0");
    require(eval_every >= 0, "eval cadence must be >= 0");
    require(eval_samples >= 1, "eval sample count must be >= 1");
    require(threads >= 0, "threads must be >= 0");
    if (filter_threshold) require(std::isfinite(*filter_threshold), "filter threshold must be finite");
}

std::string history_to_jsonl(const TrainHistory& history) {
    std::string out;
    for (const EpochReport& rep : history.epochs) {
        nlohmann::ordered_json j;
        j["epoch"] = rep.epoch;
        j["mean_reward"] = rep.mean_reward;
        j["max_reward"] = rep.max_reward;
        j["mean_advantage"] = rep.mean_advantage;
        j["loss"] = rep.loss;
        if (rep.eval) {
            nlohmann::ordered_json e;
            e["mean_acc"] = rep.eval->mean_acc;
            e["max_acc"] = rep.eval->max_acc;
            e["mean_reward"] = rep.eval->mean_reward;
            e["max_reward"] = rep.eval->max_reward;
            e["samples"] = rep.eval->samples;
            if (rep.eval->crossing) e["crossing_rate"] = *rep.eval->crossing;
            j["eval"] = std::move(e);
        }
        out += j.dump();
        out += '\n';
    }
    return out;
}

TrainHistory history_from_jsonl(std::string_view text, const std::string& origin) {
    TrainHistory history;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::size_t stop = nl == std::string_view::npos ? text.size() : nl;
        const std::string_view line = text.substr(pos, stop - pos);
        ++line_no;
        pos = stop + 1;
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(line_no) + ": ";

        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw ParseError(where + "malformed JSON");
        if (!j.is_object()) throw ParseError(where + "expected a JSON object");

        auto number = [&](const nlohmann::json& obj, const char* key) {
            if (!obj.contains(key) || !obj[key].is_number()) {
                throw ParseError(where + "missing numeric field '" + key + "'");
            }
            return obj[key].get<double>();
        };
        EpochReport rep;
        rep.epoch = static_cast<int>(number(j, "epoch"));
        rep.mean_reward = number(j, "mean_reward");
        rep.max_reward = number(j, "max_reward");
        rep.mean_advantage = number(j, "mean_advantage");
        rep.loss = number(j, "loss");
        if (j.contains("eval")) {
            if (!j["eval"].is_object()) throw ParseError(where + "'eval' must be an object");
            const auto& e = j["eval"];
            EvalReport ev;
            ev.epoch = rep.epoch;
            ev.mean_acc = number(e, "mean_acc");
            ev.max_acc = number(e, "max_acc");
            if (e.contains("mean_reward")) ev.mean_reward = number(e, "mean_reward");
            if (e.contains("max_reward")) ev.max_reward = number(e, "max_reward");
            if (e.contains("samples")) ev.samples = static_cast<int>(number(e, "samples"));
            if (e.contains("crossing_rate")) ev.crossing = number(e, "crossing_rate");
            rep.eval = std::move(ev);
        }
        history.epochs.push_back(std::move(rep));
    }
    return history;
}

std::vector<OrderedDag> filter_dataset(const std::vector<OrderedDag>& dataset,
                                       const BenchmarkTable& table, double threshold,
                                       const std::string& dataset_id,
                                       double* retained_fraction) {
    if (dataset.empty()) throw EmptyDataset("filter: empty dataset");
    std::vector<OrderedDag> kept;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        std::string key;
        try {
            key = arch_key(dataset[i], table.space);
        } catch (const InvalidArchitecture& e) {
            throw MissingEntry("filter: graph " + std::to_string(i) + ": " + e.what());
        }
        const auto* metrics = table.find(key);
        if (metrics == nullptr)
            throw MissingEntry("filter: graph " + std::to_string(i) + " has no table row");
        auto it = metrics->find(dataset_id);
        if (it == metrics->end())
            throw MissingEntry("filter: graph " + std::to_string(i) + " lacks metric '" +
                               dataset_id + "'");
        if (it->second < threshold) kept.push_back(dataset[i]);
    }
    if (retained_fraction)
        *retained_fraction =
            static_cast<double>(kept.size()) / static_cast<double>(dataset.size());
    return kept;
}

Checkpoint pretrain(const std::vector<OrderedDag>& dataset, const TrainConfig& config,
                    std::vector<double>* epoch_losses) {
    config.check();
    if (dataset.empty()) throw EmptyDataset("pretrain: empty dataset");

    NoiseSchedule schedule = cosine_schedule(config.schedule_T, config.schedule_s);
    DenoiserDims dims =
        DenoiserDims::for_space(config.space, config.pe_dim, config.hidden, config.hidden_layers);
    RngStream init_rng = RngStream::substream(config.seed, "init", 0);
    DenoiserParams params = DenoiserParams::init(dims, schedule.T, init_rng);
    AdamW opt(params, optimizer_config(config));
    RngStream rng = RngStream::substream(config.seed, "pretrain", 0);

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t pos = 0;
        while (pos < order.size()) {
            std::size_t batch_end = std::min(order.size(), pos + static_cast<std::size_t>(config.batch_size));
            for (; pos < batch_end; ++pos) {
                const OrderedDag& g0 = dataset[order[pos]];
                int t = rng.uniform_int(1, schedule.T);
                NoisyGraph g_t = forward_sample(g0, t, schedule, config.space, rng);
                auto [loss, grad] = loss_and_grad(params, g_t, t, g0, config.edge_loss_weight, 1.0);
                opt.accumulate(grad);
                loss_sum += loss;
            }
            opt.step(params, config.learning_rate);
        }
        if (epoch_losses) epoch_losses->push_back(loss_sum / static_cast<double>(dataset.size()));
    }

    Checkpoint ck;
    ck.space = config.space;
    ck.schedule_T = schedule.T;
    ck.schedule_s = schedule.s;
    ck.params = std::move(params);
    ck.optimizer = std::move(opt);
    ck.rng_state = rng.save_state();
    ck.epoch = config.epochs;
    return ck;
}

double dgpo_loss_and_grad(const DenoiserParams& params,
                          std::span<const Trajectory> trajectories, int timestep_subsample,
                          double lambda, RngStream& rng, Gradients& grad) {
    if (trajectories.empty()) throw EmptyPool("policy gradient: no trajectories");
    const double batch = static_cast<double>(trajectories.size());
    double total = 0.0;
    for (const Trajectory& traj : trajectories) {
        const int T = static_cast<int>(traj.intermediates.size());
        if (timestep_subsample < 1 || timestep_subsample > T)
            throw RangeError("policy gradient: timestep subsample outside [1, T]");
        std::vector<int> subset = rng.sample_without_replacement(T, timestep_subsample);
        double scale = (1.0 / batch) * (static_cast<double>(T) / timestep_subsample) *
                       traj.advantage;
        if (scale == 0.0) continue;
        for (int idx : subset) {
            int t = idx + 1;
            auto [loss, g] = loss_and_grad(params, traj.at_t(t), t, traj.final, lambda, scale);
            grad.add(g);
            total += loss;
        }
    }
    return total;
}

EpochReport dgpo_epoch(Checkpoint& ckpt, const NoiseSchedule& schedule,
                       const RewardOracle& oracle, RewardStats& stats,
                       const TrainConfig& config, RngStream& rng) {
    config.check();
    const int K = config.batch_size;
    const int threads = resolve_threads(config.threads);
    DenoiserFn fn = make_denoiser_fn(ckpt.params);

    double reward_sum = 0.0;
    double reward_max = -std::numeric_limits<double>::infinity();
    double adv_sum = 0.0;
    double loss_sum = 0.0;

    for (int micro = 0; micro < config.grad_accum; ++micro) {
        std::vector<Trajectory> trajs =
            roll_trajectories(fn, schedule, ckpt.space, K, rng, threads);
        std::vector<double> rewards(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) {
            rewards[static_cast<std::size_t>(k)] = oracle.reward(trajs[static_cast<std::size_t>(k)].final);
            trajs[static_cast<std::size_t>(k)].reward = rewards[static_cast<std::size_t>(k)];
        }
        stats.update_batch(rewards);
        for (int k = 0; k < K; ++k) {
            Trajectory& tr = trajs[static_cast<std::size_t>(k)];
            tr.advantage = advantage(tr.reward, stats);
            reward_sum += tr.reward;
            reward_max = std::max(reward_max, tr.reward);
            adv_sum += tr.advantage;
        }
        Gradients grad = Gradients::zeros_like(ckpt.params);
        loss_sum += dgpo_loss_and_grad(ckpt.params, trajs, config.timestep_subsample,
                                       config.edge_loss_weight, rng, grad);
        ckpt.optimizer.accumulate(grad);
    }

    ckpt.optimizer.step(ckpt.params, config.learning_rate);
    ckpt.epoch += 1;

    const double total = static_cast<double>(K) * config.grad_accum;
    EpochReport rep;
    rep.epoch = ckpt.epoch;
    rep.mean_reward = reward_sum / total;
    rep.max_reward = reward_max;
    rep.mean_advantage = adv_sum / total;
    rep.loss = loss_sum / config.grad_accum;
    return rep;
}

SampleSet draw_samples(const Checkpoint& ckpt, const RewardOracle& oracle, int count,
                       RngStream& rng, int epoch_tag, int threads) {
    if (count < 1) throw RangeError("draw_samples: count must be >= 1");
    NoiseSchedule schedule = cosine_schedule(ckpt.schedule_T, ckpt.schedule_s);
    DenoiserFn fn = make_denoiser_fn(ckpt.params);
    std::vector<Trajectory> trajs =
        roll_trajectories(fn, schedule, ckpt.space, count, rng, std::max(1, threads));

    SampleSet s;
    s.epoch = epoch_tag;
    s.samples.reserve(static_cast<std::size_t>(count));
    for (Trajectory& tr : trajs) {
        Sample smp;
        smp.graph = static_cast<const Dag&>(tr.final);
        smp.reward = oracle.reward(smp.graph);
        smp.metrics = oracle.metrics(smp.graph);
        s.samples.push_back(std::move(smp));
    }
    return s;
}

EvalReport summarize_samples(const SampleSet& s, const std::string& acc_dataset,
                             std::optional<double> threshold) {
    if (s.samples.empty()) throw EmptyPool("summarize: empty sample set");
    EvalReport rep;
    rep.epoch = s.epoch;
    rep.samples = static_cast<int>(s.size());
    rep.max_reward = -std::numeric_limits<double>::infinity();

    double acc_sum = 0.0, acc_max = 0.0, reward_sum = 0.0;
    for (const Sample& smp : s.samples) {
        auto it = smp.metrics.find(acc_dataset);
        double acc = it == smp.metrics.end() ? 0.0 : it->second; // missing row counts as 0
        acc_sum += acc;
        acc_max = std::max(acc_max, acc);
        reward_sum += smp.reward;
        rep.max_reward = std::max(rep.max_reward, smp.reward);
        for (const auto& [id, v] : smp.metrics) rep.mean_metrics[id] += v;
    }
    const double n = static_cast<double>(s.size());
    rep.mean_acc = acc_sum / n;
    rep.max_acc = acc_max;
    rep.mean_reward = reward_sum / n;
    for (auto& [id, v] : rep.mean_metrics) v /= n;
    if (threshold) rep.crossing = crossing_rate(s, *threshold, acc_dataset);
    return rep;
}

FinetuneResult finetune(const Checkpoint& start, const RewardOracle& oracle,
                        const TrainConfig& config) {
    config.check();
    config.reward.check();
    if (config.epochs == 0) return FinetuneResult{start, {}};

    FinetuneResult res;
    res.checkpoint = start;
    Checkpoint& ckpt = res.checkpoint;
    ckpt.epoch = 0; // epoch counter is phase-local
    freeze_fraction(ckpt.params, config.freeze);
    ckpt.optimizer = AdamW(ckpt.params, optimizer_config(config)); // fresh moments for the new objective

    NoiseSchedule schedule = cosine_schedule(ckpt.schedule_T, ckpt.schedule_s);
    RewardStats stats;
    RngStream rng = RngStream::substream(config.seed, "finetune", 0);
    const int threads = resolve_threads(config.threads);

    TrainHistory& hist = res.history;
    auto run_eval = [&](int epoch) {
        RngStream eval_rng =
            RngStream::substream(config.seed, "eval", static_cast<std::uint64_t>(epoch));
        SampleSet samples =
            draw_samples(ckpt, oracle, config.eval_samples, eval_rng, epoch, threads);
        samples.seed = config.seed;
        EvalReport rep = summarize_samples(samples, config.eval_dataset(), config.filter_threshold);
        hist.eval_samples.push_back(std::move(samples));
        return rep;
    };

    if (config.eval_every > 0) {
        // Epoch-0 record: sampling stats of the untouched starting model.
        EvalReport base = run_eval(0);
        EpochReport r0;
        r0.epoch = 0;
        r0.mean_reward = base.mean_reward;
        r0.max_reward = base.max_reward;
        r0.eval = base;
        hist.epochs.push_back(std::move(r0));
    }

    for (int e = 1; e <= config.epochs; ++e) {
        EpochReport rep = dgpo_epoch(ckpt, schedule, oracle, stats, config, rng);
        if (config.eval_every > 0 && (e % config.eval_every == 0 || e == config.epochs))
            rep.eval = run_eval(e);
        hist.epochs.push_back(std::move(rep));
    }

    ckpt.rng_state = rng.save_state();
    return res;
}

} // namespace dagpo
