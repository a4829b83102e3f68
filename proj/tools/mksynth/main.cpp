#include <algorithm>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dagpo/dag.hpp"
#include "dagpo/errors.hpp"
#include "dagpo/io.hpp"
#include "dagpo/reward.hpp"
#include "dagpo/rng.hpp"
#include "dagpo/search_space.hpp"

using namespace dagpo;

namespace {

// Uniform rejection sampling over the space's valid canonical graphs.
OrderedDag random_graph(const SpaceSpec& spec, RngStream& rng) {
    for (int attempt = 0; attempt < 100000; ++attempt) {
        Dag g = Dag::empty(spec.max_nodes);
        for (int i = 0; i < spec.max_nodes; ++i) {
            g.node_labels[static_cast<std::size_t>(i)] =
                rng.uniform_int(0, spec.node_cats - 1);
        }
        for (int i = 0; i < spec.max_nodes; ++i) {
            for (int j = i + 1; j < spec.max_nodes; ++j) {
                g.set_edge(i, j, rng.uniform_int(0, spec.edge_cats - 1));
            }
        }
        if (validate(g, spec).ok()) return topological_order(g);
    }
    throw RangeError("no valid graph found after 100000 draws; check the space");
}

} // namespace

// Dataset generator: writes uniformly drawn valid graphs of a space, and
// optionally a matching benchmark table scored by the synthetic oracle (for
// exercising the tabular pipeline without external data).
int main(int argc, char** argv) {
    CLI::App app{"Generate random graph datasets"};
    std::string space_name = "synthetic";
    int nodes = 0, node_cats = 0, edge_cats = 0;
    int n = 100;
    std::uint64_t seed = 1;
    std::string out = "dataset.jsonl";
    std::string table_out;
    bool unique = false;

    app.add_option("--space", space_name, "synthetic, nb101 or nb201");
    app.add_option("--nodes", nodes, "synthetic space: node count");
    app.add_option("--node-cats", node_cats, "synthetic space: node categories");
    app.add_option("--edge-cats", edge_cats, "synthetic space: edge categories");
    app.add_option("--n", n, "graphs to draw")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "rng seed");
    app.add_option("--out", out, "dataset output path");
    app.add_option("--table", table_out,
                   "also write a synthetic-scored benchmark table here");
    app.add_flag("--unique", unique, "deduplicate drawn graphs");
    CLI11_PARSE(app, argc, argv);

    try {
        SpaceSpec spec = SpaceSpec::by_name(space_name);
        if (spec.name == "synthetic" && (nodes | node_cats | edge_cats) != 0) {
            spec = SpaceSpec::synthetic(nodes > 0 ? nodes : spec.max_nodes,
                                        node_cats > 0 ? node_cats : spec.node_cats,
                                        edge_cats > 0 ? edge_cats : spec.edge_cats);
        }
        RngStream rng = RngStream::substream(seed, "mksynth", 0);
        std::vector<OrderedDag> graphs;
        std::set<std::string> seen;
        while (static_cast<int>(graphs.size()) < n) {
            OrderedDag g = random_graph(spec, rng);
            if (unique && !seen.insert(arch_key(g, spec)).second) continue;
            graphs.push_back(std::move(g));
        }
        write_dataset(out, graphs);
        std::cout << "wrote " << n << " graphs to " << out << "\n";

        if (!table_out.empty()) {
            const RewardOracle oracle = make_synthetic_oracle();
            std::set<std::string> keys;
            std::string table;
            for (const auto& g : graphs) keys.insert(arch_key(g, spec));
            for (const auto& key : keys) {
                const Dag g = arch_key_to_dag(key, spec);
                nlohmann::ordered_json j;
                j["key"] = key;
                j["metrics"] = oracle.metrics(g);
                table += j.dump() + "\n";
            }
            write_file(table_out, table);
            std::cout << "wrote " << keys.size() << " table rows to " << table_out
                      << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "mksynth: error: " << e.what() << "\n";
        return 1;
    }
}
