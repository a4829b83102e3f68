#include "dagpo/config.hpp"

#include <cctype>
#include <charconv>
#include <filesystem>

#include "dagpo/errors.hpp"
#include "dagpo/io.hpp"

namespace dagpo {
namespace {

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

std::string fmt(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

template <typename T>
T parse_num(const std::string& key, const std::string& value) {
    T out{};
    const char* begin = value.data();
    const char* end = begin + value.size();
    auto res = std::from_chars(begin, end, out);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw ParseError(key + ": cannot parse '" + value + "' as a number");
    }
    return out;
}

std::vector<std::string> split_list(const std::string& key, const std::string& value) {
    std::vector<std::string> items;
    std::size_t start = 0;
    while (start <= value.size()) {
        const std::size_t comma = value.find(',', start);
        const std::size_t stop = comma == std::string::npos ? value.size() : comma;
        const std::string item = trim(std::string_view(value).substr(start, stop - start));
        if (item.empty()) throw ParseError(key + ": empty list item");
        items.push_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return items;
}

// List keys that patch one field of every reward term.
template <typename Apply>
void patch_terms(RewardSpec& reward, const std::string& key, const std::string& value,
                 Apply apply) {
    const auto items = split_list(key, value);
    if (items.size() != reward.terms.size()) {
        throw DimensionMismatch(key + ": " + std::to_string(items.size()) +
                                " values for " + std::to_string(reward.terms.size()) +
                                " datasets (set reward.datasets first)");
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
        apply(reward.terms[i], parse_num<double>(key, items[i]));
    }
}

} // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "space") {
        train.space = SpaceSpec::by_name(value);
    } else if (key == "space.nodes" || key == "space.node_cats" ||
               key == "space.edge_cats") {
        if (train.space.name != "synthetic") {
            throw KeyError(key + ": applies to the synthetic space only (space=" +
                           train.space.name + ")");
        }
        const int v = parse_num<int>(key, value);
        if (v < 1) throw RangeError(key + ": must be >= 1, got " + value);
        int n = train.space.max_nodes, nc = train.space.node_cats,
            ec = train.space.edge_cats;
        (key == "space.nodes" ? n : key == "space.node_cats" ? nc : ec) = v;
        train.space = SpaceSpec::synthetic(n, nc, ec);
    } else if (key == "phase") {
        TrainConfig d;
        if (value == "pretrain") {
            d = TrainConfig::pretrain_defaults(train.space);
        } else if (value == "finetune") {
            d = TrainConfig::finetune_defaults(train.space);
        } else {
            throw ParseError("phase: expected pretrain or finetune, got '" + value + "'");
        }
        train.phase = d.phase;
        train.epochs = d.epochs;
        train.batch_size = d.batch_size;
        train.learning_rate = d.learning_rate;
    } else if (key == "reward.mode") {
        if (value == "forward") {
            train.reward.mode = RewardMode::forward;
        } else if (value == "inverse") {
            train.reward.mode = RewardMode::inverse;
        } else if (value == "multi_objective") {
            train.reward.mode = RewardMode::multi_objective;
        } else {
            throw ParseError(
                "reward.mode: expected forward, inverse or multi_objective, got '" +
                value + "'");
        }
    } else if (key == "reward.datasets") {
        train.reward.terms.clear();
        for (const auto& id : split_list(key, value)) {
            train.reward.terms.push_back(RewardTerm{id});
        }
    } else if (key == "reward.weights") {
        patch_terms(train.reward, key, value,
                    [](RewardTerm& t, double v) { t.weight = v; });
    } else if (key == "reward.lo") {
        patch_terms(train.reward, key, value, [](RewardTerm& t, double v) { t.lo = v; });
    } else if (key == "reward.hi") {
        patch_terms(train.reward, key, value, [](RewardTerm& t, double v) { t.hi = v; });
    } else if (key == "epochs") {
        train.epochs = parse_num<int>(key, value);
    } else if (key == "batch_size") {
        train.batch_size = parse_num<int>(key, value);
    } else if (key == "learning_rate") {
        train.learning_rate = parse_num<double>(key, value);
    } else if (key == "timestep_subsample") {
        train.timestep_subsample = parse_num<int>(key, value);
    } else if (key == "freeze") {
        train.freeze = parse_num<double>(key, value);
    } else if (key == "edge_loss_weight") {
        train.edge_loss_weight = parse_num<double>(key, value);
    } else if (key == "grad_accum") {
        train.grad_accum = parse_num<int>(key, value);
    } else if (key == "seed") {
        train.seed = parse_num<std::uint64_t>(key, value);
    } else if (key == "schedule.T") {
        train.schedule_T = parse_num<int>(key, value);
    } else if (key == "schedule.s") {
        train.schedule_s = parse_num<double>(key, value);
    } else if (key == "pe_dim") {
        train.pe_dim = parse_num<int>(key, value);
    } else if (key == "hidden") {
        train.hidden = parse_num<int>(key, value);
    } else if (key == "hidden_layers") {
        train.hidden_layers = parse_num<int>(key, value);
    } else if (key == "weight_decay") {
        train.weight_decay = parse_num<double>(key, value);
    } else if (key == "eval.every") {
        train.eval_every = parse_num<int>(key, value);
    } else if (key == "eval.samples") {
        train.eval_samples = parse_num<int>(key, value);
    } else if (key == "threads") {
        train.threads = parse_num<int>(key, value);
    } else if (key == "filter.threshold") {
        if (value.empty() || value == "none") {
            train.filter_threshold.reset();
        } else {
            train.filter_threshold = parse_num<double>(key, value);
        }
    } else if (key == "filter.dataset") {
        train.filter_dataset = value;
    } else if (key == "paths.dataset") {
        dataset_path = value;
    } else if (key == "paths.table") {
        table_path = value;
    } else if (key == "paths.checkpoint") {
        checkpoint_path = value;
    } else if (key == "paths.out") {
        out_dir = value;
    } else {
        throw KeyError("unknown config key '" + key + "'");
    }
}

std::string RunConfig::to_text() const {
    std::string out;
    auto put = [&out](const std::string& key, const std::string& value) {
        out += key + " = " + value + "\n";
    };
    put("space", train.space.name);
    if (train.space.name == "synthetic") {
        put("space.nodes", std::to_string(train.space.max_nodes));
        put("space.node_cats", std::to_string(train.space.node_cats));
        put("space.edge_cats", std::to_string(train.space.edge_cats));
    }
    put("phase", train.phase == TrainPhase::pretrain ? "pretrain" : "finetune");

    const char* mode = train.reward.mode == RewardMode::forward    ? "forward"
                       : train.reward.mode == RewardMode::inverse ? "inverse"
                                                                  : "multi_objective";
    put("reward.mode", mode);
    std::string ids, weights, los, his;
    for (const auto& t : train.reward.terms) {
        const char* sep = ids.empty() ? "" : ",";
        ids += sep + t.dataset;
        weights += sep + fmt(t.weight);
        los += sep + fmt(t.lo);
        his += sep + fmt(t.hi);
    }
    put("reward.datasets", ids);
    put("reward.weights", weights);
    put("reward.lo", los);
    put("reward.hi", his);

    put("epochs", std::to_string(train.epochs));
    put("batch_size", std::to_string(train.batch_size));
    put("learning_rate", fmt(train.learning_rate));
    put("timestep_subsample", std::to_string(train.timestep_subsample));
    put("freeze", fmt(train.freeze));
    put("edge_loss_weight", fmt(train.edge_loss_weight));
    put("grad_accum", std::to_string(train.grad_accum));
    put("seed", std::to_string(train.seed));
    put("schedule.T", std::to_string(train.schedule_T));
    put("schedule.s", fmt(train.schedule_s));
    put("pe_dim", std::to_string(train.pe_dim));
    put("hidden", std::to_string(train.hidden));
    put("hidden_layers", std::to_string(train.hidden_layers));
    put("weight_decay", fmt(train.weight_decay));
    put("eval.every", std::to_string(train.eval_every));
    put("eval.samples", std::to_string(train.eval_samples));
    put("threads", std::to_string(train.threads));
    put("filter.dataset", train.filter_dataset);
    if (train.filter_threshold.has_value()) {
        put("filter.threshold", fmt(*train.filter_threshold));
    }
    put("paths.dataset", dataset_path);
    put("paths.table", table_path);
    put("paths.checkpoint", checkpoint_path);
    put("paths.out", out_dir);
    return out;
}

void RunConfig::archive(const std::string& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("archive: cannot create '" + dir + "': " + ec.message());
    write_file((std::filesystem::path(dir) / "config.effective").string(), to_text());
}

RunConfig RunConfig::from_text(std::string_view text, const std::string& origin) {
    RunConfig config;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::size_t stop = nl == std::string_view::npos ? text.size() : nl;
        const std::string line = trim(text.substr(pos, stop - pos));
        ++line_no;
        pos = stop + 1;
        if (nl == std::string_view::npos && line.empty()) break;
        if (line.empty() || line[0] == '#') continue;

        const std::size_t eq = line.find('=');
        const std::string where = origin + ":" + std::to_string(line_no) + ": ";
        if (eq == std::string::npos) {
            throw ParseError(where + "expected key = value");
        }
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ParseError(where + "empty key");
        try {
            config.set(key, value);
        } catch (const Error& e) {
            throw ParseError(where + e.what());
        }
    }
    return config;
}

RunConfig RunConfig::from_file(const std::string& path) {
    return from_text(read_file(path), path);
}

} // namespace dagpo
