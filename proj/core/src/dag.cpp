#include "dagpo/dag.hpp"

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "dagpo/errors.hpp"

namespace dagpo {

std::pair<int, int> upper_tri_cell(int n, int k) {
    if (k < 0 || k >= upper_tri_count(n)) throw RangeError("upper_tri_cell: rank out of range");
    int i = 0;
    int row_len = n - 1;
    while (k >= row_len) {
        k -= row_len;
        --row_len;
        ++i;
    }
    return {i, i + 1 + k};
}

Dag::Dag(int n_, std::vector<int> labels, std::vector<int> edge_matrix)
    : n(n_), node_labels(std::move(labels)), edges(std::move(edge_matrix)) {
    if (n < 0) throw DimensionMismatch("Dag: negative node count");
    if (node_labels.size() != static_cast<std::size_t>(n))
        throw DimensionMismatch("Dag: node_labels size does not equal n");
    if (edges.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n))
        throw DimensionMismatch("Dag: edge matrix size does not equal n*n");
    for (int v : node_labels)
        if (v < 0) throw RangeError("Dag: negative node label");
    for (int v : edges)
        if (v < 0) throw RangeError("Dag: negative edge category");
}

Dag Dag::empty(int n) {
    return Dag(n, std::vector<int>(static_cast<std::size_t>(n), 0),
               std::vector<int>(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0));
}

int Dag::edge_count() const {
    int c = 0;
    for (int v : edges) c += (v != 0);
    return c;
}

bool is_acyclic(const Dag& g) {
    // Kahn peeling without the ordering bookkeeping.
    std::vector<int> indeg(static_cast<std::size_t>(g.n), 0);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            if (g.edge(i, j) != 0) ++indeg[static_cast<std::size_t>(j)];
    std::vector<int> stack;
    for (int i = 0; i < g.n; ++i)
        if (indeg[static_cast<std::size_t>(i)] == 0) stack.push_back(i);
    int removed = 0;
    while (!stack.empty()) {
        int i = stack.back();
        stack.pop_back();
        ++removed;
        for (int j = 0; j < g.n; ++j)
            if (g.edge(i, j) != 0 && --indeg[static_cast<std::size_t>(j)] == 0)
                stack.push_back(j);
    }
    return removed == g.n;
}

OrderedDag topological_order(const Dag& g) {
    std::vector<int> indeg(static_cast<std::size_t>(g.n), 0);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            if (g.edge(i, j) != 0) ++indeg[static_cast<std::size_t>(j)];

    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(g.n));
    std::vector<bool> placed(static_cast<std::size_t>(g.n), false);
    for (int step = 0; step < g.n; ++step) {
        // Smallest-index ready node; n is small enough that a scan beats a heap.
        int pick = -1;
        for (int i = 0; i < g.n; ++i) {
            if (!placed[static_cast<std::size_t>(i)] && indeg[static_cast<std::size_t>(i)] == 0) {
                pick = i;
                break;
            }
        }
        if (pick < 0) throw CycleDetected("topological_order: graph contains a cycle");
        placed[static_cast<std::size_t>(pick)] = true;
        order.push_back(pick);
        for (int j = 0; j < g.n; ++j)
            if (g.edge(pick, j) != 0) --indeg[static_cast<std::size_t>(j)];
    }

    OrderedDag out;
    out.n = g.n;
    out.order = order;
    out.node_labels.resize(static_cast<std::size_t>(g.n));
    out.edges.assign(static_cast<std::size_t>(g.n) * static_cast<std::size_t>(g.n), 0);
    for (int a = 0; a < g.n; ++a) {
        out.node_labels[static_cast<std::size_t>(a)] =
            g.node_labels[static_cast<std::size_t>(order[static_cast<std::size_t>(a)])];
        for (int b = 0; b < g.n; ++b) {
            int cat = g.edge(order[static_cast<std::size_t>(a)], order[static_cast<std::size_t>(b)]);
            if (cat != 0) out.set_edge(a, b, cat);
        }
    }
    return out;
}

OrderedDag recover_dag(int n, std::span<const int> raw_edges,
                       std::span<const int> node_labels) {
    if (raw_edges.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n))
        throw DimensionMismatch("recover_dag: edge matrix size does not equal n*n");
    if (node_labels.size() != static_cast<std::size_t>(n))
        throw DimensionMismatch("recover_dag: node_labels size does not equal n");
    OrderedDag out;
    out.n = n;
    out.node_labels.assign(node_labels.begin(), node_labels.end());
    out.edges.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            out.set_edge(i, j, raw_edges[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
                                         static_cast<std::size_t>(j)]);
    out.order.resize(static_cast<std::size_t>(n));
    std::iota(out.order.begin(), out.order.end(), 0);
    return out;
}

std::vector<double> positional_encoding(int index, int dim) {
    if (dim <= 0 || dim % 2 != 0)
        throw InvalidDim("positional_encoding: dim must be positive and even");
    std::vector<double> out(static_cast<std::size_t>(dim));
    for (int k = 0; 2 * k < dim; ++k) {
        double freq = std::pow(10000.0, -2.0 * k / dim);
        double angle = index * freq;
        out[static_cast<std::size_t>(2 * k)] = std::sin(angle);
        out[static_cast<std::size_t>(2 * k + 1)] = std::cos(angle);
    }
    return out;
}

PositionalEncodingTable::PositionalEncodingTable(int max_index, int dim)
    : max_index_(max_index), dim_(dim) {
    if (max_index <= 0) throw InvalidDim("PositionalEncodingTable: max_index must be positive");
    data_.reserve(static_cast<std::size_t>(max_index) * static_cast<std::size_t>(dim));
    for (int i = 0; i < max_index; ++i) {
        auto row = positional_encoding(i, dim);
        data_.insert(data_.end(), row.begin(), row.end());
    }
}

std::span<const double> PositionalEncodingTable::row(int index) const {
    if (index < 0 || index >= max_index_)
        throw RangeError("PositionalEncodingTable: index out of range");
    return {data_.data() + static_cast<std::size_t>(index) * static_cast<std::size_t>(dim_),
            static_cast<std::size_t>(dim_)};
}

std::string to_json(const Dag& g) {
    nlohmann::ordered_json j;
    j["n"] = g.n;
    j["node_labels"] = g.node_labels;
    auto rows = nlohmann::ordered_json::array();
    for (int i = 0; i < g.n; ++i) {
        auto row = nlohmann::ordered_json::array();
        for (int k = 0; k < g.n; ++k) row.push_back(g.edge(i, k));
        rows.push_back(std::move(row));
    }
    j["edges"] = std::move(rows);
    return j.dump();
}

Dag dag_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("dag_from_json: ") + e.what());
    }
    if (!j.is_object() || !j.contains("n") || !j.contains("node_labels") || !j.contains("edges"))
        throw ParseError("dag_from_json: need object with n, node_labels, edges");
    if (!j["n"].is_number_integer())
        throw ParseError("dag_from_json: n must be an integer");
    int n = j["n"].get<int>();
    if (n < 1) throw ParseError("dag_from_json: n must be at least 1");
    if (!j["node_labels"].is_array() || j["node_labels"].size() != static_cast<std::size_t>(n))
        throw ParseError("dag_from_json: node_labels must be an array of length n");
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(n));
    for (const auto& v : j["node_labels"]) {
        if (!v.is_number_integer() || v.get<int>() < 0)
            throw ParseError("dag_from_json: node labels must be non-negative integers");
        labels.push_back(v.get<int>());
    }
    if (!j["edges"].is_array() || j["edges"].size() != static_cast<std::size_t>(n))
        throw ParseError("dag_from_json: edges must be an n x n matrix");
    std::vector<int> edges;
    edges.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (const auto& row : j["edges"]) {
        if (!row.is_array() || row.size() != static_cast<std::size_t>(n))
            throw ParseError("dag_from_json: edges must be an n x n matrix");
        for (const auto& v : row) {
            if (!v.is_number_integer() || v.get<int>() < 0)
                throw ParseError("dag_from_json: edge categories must be non-negative integers");
            edges.push_back(v.get<int>());
        }
    }
    return Dag(n, std::move(labels), std::move(edges));
}

} // namespace dagpo
