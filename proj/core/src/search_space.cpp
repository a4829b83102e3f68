#include "dagpo/search_space.hpp"

#include <algorithm>
#include <limits>

#include "dagpo/errors.hpp"

namespace dagpo {

namespace {

constexpr int kNb101Absent = 5;
constexpr int kNb101MaxEdges = 9;

void check_nb101_rules(const Dag& c, ValidityReport& rep) {
    // c is already canonically ordered.
    int inputs = 0, outputs = 0, real = 0;
    bool absent_seen = false;
    for (int i = 0; i < c.n; ++i) {
        int lab = c.node_labels[static_cast<std::size_t>(i)];
        if (lab == kNb101Absent) {
            absent_seen = true;
            continue;
        }
        ++real;
        if (absent_seen)
            rep.violations.push_back("absent node slots must trail the real nodes");
        if (lab == 0) ++inputs;
        if (lab == 1) ++outputs;
    }
    if (inputs != 1) rep.violations.push_back("cell must have exactly one input node");
    if (outputs != 1) rep.violations.push_back("cell must have exactly one output node");
    if (real < 2) rep.violations.push_back("cell needs at least an input and an output");

    std::vector<int> indeg(static_cast<std::size_t>(c.n), 0);
    std::vector<int> outdeg(static_cast<std::size_t>(c.n), 0);
    int edge_total = 0;
    for (int i = 0; i < c.n; ++i)
        for (int j = 0; j < c.n; ++j)
            if (c.edge(i, j) != 0) {
                ++edge_total;
                ++outdeg[static_cast<std::size_t>(i)];
                ++indeg[static_cast<std::size_t>(j)];
                if (c.node_labels[static_cast<std::size_t>(i)] == kNb101Absent ||
                    c.node_labels[static_cast<std::size_t>(j)] == kNb101Absent)
                    rep.violations.push_back("absent node slots cannot carry edges");
            }
    if (edge_total > kNb101MaxEdges)
        rep.violations.push_back("cell exceeds the 9-edge budget");

    int input_node = -1, output_node = -1;
    for (int i = 0; i < c.n; ++i) {
        int lab = c.node_labels[static_cast<std::size_t>(i)];
        if (lab == 0) {
            if (indeg[static_cast<std::size_t>(i)] != 0)
                rep.violations.push_back("input node must have in-degree zero");
            input_node = i;
        }
        if (lab == 1) {
            if (outdeg[static_cast<std::size_t>(i)] != 0)
                rep.violations.push_back("output node must have out-degree zero");
            output_node = i;
        }
    }

    if (inputs == 1 && outputs == 1 && input_node >= 0 && output_node >= 0) {
        // A node counts only if it sits on some input -> output path.
        auto reach = [&](int start, bool forward) {
            std::vector<bool> seen(static_cast<std::size_t>(c.n), false);
            std::vector<int> stack{start};
            seen[static_cast<std::size_t>(start)] = true;
            while (!stack.empty()) {
                int u = stack.back();
                stack.pop_back();
                for (int v = 0; v < c.n; ++v) {
                    int cat = forward ? c.edge(u, v) : c.edge(v, u);
                    if (cat != 0 && !seen[static_cast<std::size_t>(v)]) {
                        seen[static_cast<std::size_t>(v)] = true;
                        stack.push_back(v);
                    }
                }
            }
            return seen;
        };
        auto from_input = reach(input_node, true);
        auto to_output = reach(output_node, false);
        for (int i = 0; i < c.n; ++i) {
            if (c.node_labels[static_cast<std::size_t>(i)] == kNb101Absent) continue;
            if (!from_input[static_cast<std::size_t>(i)] || !to_output[static_cast<std::size_t>(i)])
                rep.violations.push_back("every real node must lie on an input-to-output path");
        }
    }
}

void check_nb201_rules(const Dag& c, ValidityReport& rep) {
    for (int i = 0; i < c.n; ++i)
        for (int j = i + 1; j < c.n; ++j)
            if (c.edge(i, j) == 0)
                rep.violations.push_back("cell requires an operation on every edge slot");
}

// Saturating product, used to bound enumeration size before doing it.
std::size_t sat_mul(std::size_t a, std::size_t b) {
    if (a == 0 || b == 0) return 0;
    if (a > std::numeric_limits<std::size_t>::max() / b)
        return std::numeric_limits<std::size_t>::max();
    return a * b;
}

} // namespace

SpaceSpec SpaceSpec::nb101() {
    return SpaceSpec{"nb101", 7, 6, 2, SpaceRules::nb101_cell};
}

SpaceSpec SpaceSpec::nb201() {
    return SpaceSpec{"nb201", 4, 1, 6, SpaceRules::nb201_cell};
}

SpaceSpec SpaceSpec::synthetic(int nodes, int node_cats, int edge_cats) {
    if (nodes < 1 || node_cats < 1 || edge_cats < 2)
        throw RangeError("synthetic space needs nodes >= 1, node_cats >= 1, edge_cats >= 2");
    return SpaceSpec{"synthetic", nodes, node_cats, edge_cats, SpaceRules::none};
}

SpaceSpec SpaceSpec::by_name(const std::string& name) {
    if (name == "nb101") return nb101();
    if (name == "nb201") return nb201();
    if (name == "synthetic") return synthetic();
    throw KeyError("unknown search space: " + name);
}

ValidityReport validate(const Dag& g, const SpaceSpec& spec) {
    ValidityReport rep;
    if (g.n != spec.max_nodes) {
        rep.violations.push_back("graph has the wrong node count for this space");
        return rep;
    }
    for (int i = 0; i < g.n; ++i)
        if (g.node_labels[static_cast<std::size_t>(i)] >= spec.node_cats) {
            rep.violations.push_back("node label out of range for this space");
            break;
        }
    bool edge_range_ok = true;
    for (int v : g.edges)
        if (v >= spec.edge_cats) {
            rep.violations.push_back("edge category out of range for this space");
            edge_range_ok = false;
            break;
        }
    if (!is_acyclic(g)) {
        rep.violations.push_back("graph contains a cycle");
        return rep;
    }
    if (!rep.ok() && !edge_range_ok) return rep;

    Dag c = topological_order(g);
    switch (spec.rules) {
        case SpaceRules::none:
            break;
        case SpaceRules::nb101_cell:
            check_nb101_rules(c, rep);
            break;
        case SpaceRules::nb201_cell:
            check_nb201_rules(c, rep);
            break;
    }
    return rep;
}

std::string arch_key(const Dag& g, const SpaceSpec& spec) {
    ValidityReport rep = validate(g, spec);
    if (!rep.ok()) {
        std::string msg = "arch_key: graph is not a valid " + spec.name + " architecture:";
        for (const auto& v : rep.violations) msg += "\n  - " + v;
        throw InvalidArchitecture(msg);
    }
    return spec.name + ":" + to_json(topological_order(g));
}

Dag arch_key_to_dag(const std::string& key, const SpaceSpec& spec) {
    auto colon = key.find(':');
    if (colon == std::string::npos) throw KeyError("arch key has no space prefix");
    if (key.substr(0, colon) != spec.name)
        throw KeyError("arch key names space '" + key.substr(0, colon) + "', expected '" +
                       spec.name + "'");
    Dag g = dag_from_json(key.substr(colon + 1));
    ValidityReport rep = validate(g, spec);
    if (!rep.ok()) {
        std::string msg = "arch key decodes to an invalid architecture:";
        for (const auto& v : rep.violations) msg += "\n  - " + v;
        throw InvalidArchitecture(msg);
    }
    return g;
}

std::vector<Dag> enumerate_space(const SpaceSpec& spec, std::size_t cap) {
    const int n = spec.max_nodes;
    const int m = spec.upper_cells();

    // Raw per-slot ranges; nb201 skips category 0 so the bound is exact.
    int edge_lo = spec.rules == SpaceRules::nb201_cell ? 1 : 0;
    std::size_t bound = 1;
    for (int i = 0; i < n; ++i) bound = sat_mul(bound, static_cast<std::size_t>(spec.node_cats));
    for (int e = 0; e < m; ++e)
        bound = sat_mul(bound, static_cast<std::size_t>(spec.edge_cats - edge_lo));
    if (bound > cap)
        throw SpaceTooLarge("enumerate_space: " + spec.name + " has up to " +
                            (bound == std::numeric_limits<std::size_t>::max()
                                 ? std::string(">10^19")
                                 : std::to_string(bound)) +
                            " assignments, cap is " + std::to_string(cap));

    std::vector<Dag> out;
    out.reserve(std::min<std::size_t>(bound, 65536));
    // Odometer over node labels then upper-triangle edge slots, last slot
    // fastest, filtered through validate().
    std::vector<int> labels(static_cast<std::size_t>(n), 0);
    std::vector<int> cells(static_cast<std::size_t>(m), edge_lo);
    while (true) {
        Dag g = Dag::empty(n);
        g.node_labels = labels;
        for (int e = 0; e < m; ++e) {
            auto [i, j] = upper_tri_cell(n, e);
            g.set_edge(i, j, cells[static_cast<std::size_t>(e)]);
        }
        if (validate(g, spec).ok()) out.push_back(std::move(g));

        int slot = m - 1;
        for (; slot >= 0; --slot) {
            if (++cells[static_cast<std::size_t>(slot)] < spec.edge_cats) break;
            cells[static_cast<std::size_t>(slot)] = edge_lo;
        }
        if (slot >= 0) continue;
        int ns = n - 1;
        for (; ns >= 0; --ns) {
            if (++labels[static_cast<std::size_t>(ns)] < spec.node_cats) break;
            labels[static_cast<std::size_t>(ns)] = 0;
        }
        if (ns < 0) break;
    }
    return out;
}

} // namespace dagpo
