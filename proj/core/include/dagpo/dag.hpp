#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dagpo {

// Cells strictly above the diagonal of an n x n matrix.
constexpr int upper_tri_count(int n) { return n * (n - 1) / 2; }

// Dense rank of cell (i, j), i < j, scanning rows top to bottom.
constexpr int upper_tri_index(int n, int i, int j) {
    return i * n - i * (i + 1) / 2 + (j - i - 1);
}

// Inverse of upper_tri_index.
std::pair<int, int> upper_tri_cell(int n, int k);

// Labeled directed graph on n nodes. Edge categories are stored densely,
// row-major: edges[i*n + j] is the category of edge i -> j, 0 meaning the
// edge is absent. Node labels are small non-negative category indices.
struct Dag {
    int n = 0;
    std::vector<int> node_labels;
    std::vector<int> edges;

    Dag() = default;
    Dag(int n_, std::vector<int> labels, std::vector<int> edge_matrix);

    // n nodes of label 0 and no edges.
    static Dag empty(int n);

    int edge(int i, int j) const {
        return edges[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
                     static_cast<std::size_t>(j)];
    }
    void set_edge(int i, int j, int cat) {
        edges[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
              static_cast<std::size_t>(j)] = cat;
    }

    int edge_count() const;

    bool operator==(const Dag&) const = default;
};

// A Dag whose edges all point from a lower index to a higher one, plus the
// permutation that produced it: order[slot] is the node's original index.
struct OrderedDag : Dag {
    std::vector<int> order;

    bool operator==(const OrderedDag&) const = default;
};

bool is_acyclic(const Dag& g);

// Kahn's algorithm, smallest original index first among ready nodes, then
// relabels nodes by their slot so every edge points upward. An input that is
// already strictly upper-triangular comes back unchanged with the identity
// order. Throws CycleDetected.
OrderedDag topological_order(const Dag& g);

// Projects an arbitrary dense category matrix onto a DAG by zeroing the
// diagonal and everything below it. Idempotent. Order is the identity.
OrderedDag recover_dag(int n, std::span<const int> raw_edges,
                       std::span<const int> node_labels);

// Sinusoidal encoding of one index: component 2k holds
// sin(index / 10000^(2k/dim)) and component 2k+1 the matching cosine.
// Throws InvalidDim unless dim is positive and even.
std::vector<double> positional_encoding(int index, int dim);

// Rows of positional_encoding for indices 0..max_index-1, precomputed.
class PositionalEncodingTable {
public:
    PositionalEncodingTable() = default;
    PositionalEncodingTable(int max_index, int dim);

    std::span<const double> row(int index) const;
    int dim() const { return dim_; }
    int max_index() const { return max_index_; }

private:
    int max_index_ = 0;
    int dim_ = 0;
    std::vector<double> data_;
};

// JSON object {"n": int, "node_labels": [int], "edges": [[int]]} with edges
// as an n x n matrix of category indices. from-side throws ParseError.
std::string to_json(const Dag& g);
Dag dag_from_json(const std::string& text);

} // namespace dagpo
