#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dagpo/dag.hpp"

namespace dagpo {

// Structural rule set a graph must satisfy to name a real architecture.
enum class SpaceRules { none, nb101_cell, nb201_cell };

// Shape and rules of one architecture family. Graph tensors in a space are
// fixed-size: max_nodes node slots, node labels in [0, node_cats), edge
// categories in [0, edge_cats) with 0 meaning the edge is absent.
struct SpaceSpec {
    std::string name;
    int max_nodes = 0;
    int node_cats = 0;
    int edge_cats = 0;
    SpaceRules rules = SpaceRules::none;

    int upper_cells() const { return upper_tri_count(max_nodes); }

    // 7 node slots; labels: 0 input, 1 output, 2..4 operations, 5 absent.
    // Plain directed edges (categories 0/1), at most 9 of them.
    static SpaceSpec nb101();

    // 4-node cells whose 6 edge slots each carry an operation in 1..5.
    static SpaceSpec nb201();

    // Unconstrained DAGs; every strictly upper-triangular tensor is valid.
    static SpaceSpec synthetic(int nodes = 5, int node_cats = 2, int edge_cats = 3);

    // "nb101", "nb201", or "synthetic" (with its default dims). KeyError otherwise.
    static SpaceSpec by_name(const std::string& name);

    bool operator==(const SpaceSpec&) const = default;
};

struct ValidityReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

// Checks a graph against the space rules. Shape mismatches, out-of-range
// categories, and cycles are reported as violations, not thrown.
ValidityReport validate(const Dag& g, const SpaceSpec& spec);

// Canonical text key: space name, a colon, then the JSON of the canonically
// ordered graph. Two graphs get equal keys iff their canonical forms are
// equal. Throws InvalidArchitecture listing every violation when the graph
// fails validate().
std::string arch_key(const Dag& g, const SpaceSpec& spec);

// Inverse of arch_key. Throws KeyError when the prefix names a different
// space, ParseError on malformed JSON, InvalidArchitecture if the decoded
// graph fails validation.
Dag arch_key_to_dag(const std::string& key, const SpaceSpec& spec);

// Every valid canonical graph of the space, deterministically ordered.
// Throws SpaceTooLarge when the raw assignment count exceeds cap.
std::vector<Dag> enumerate_space(const SpaceSpec& spec, std::size_t cap = 1000000);

} // namespace dagpo
