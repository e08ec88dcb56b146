#pragma once

// Text formats: whitespace-separated edge lists ("u v" per line, '#' comments)
// and "node label" annotation files. Node tokens are arbitrary strings mapped
// to indices in first-seen order.

#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "graph.hpp"

namespace ebgraph {

/// Bidirectional map between node tokens and dense indices.
class NodeIndex {
public:
    int intern(const std::string& token) {
        auto [it, inserted] = index_.try_emplace(token, static_cast<int>(names_.size()));
        if (inserted) names_.push_back(token);
        return it->second;
    }

    std::optional<int> find(const std::string& token) const {
        auto it = index_.find(token);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    int size() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }

    /// Identity names "0".."n-1".
    static NodeIndex sequential(int n) {
        NodeIndex idx;
        for (int i = 0; i < n; ++i) idx.intern(std::to_string(i));
        return idx;
    }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
};

namespace detail {

/// Splits a line into whitespace tokens; empty and '#'-comment lines yield none.
inline std::vector<std::string> tokens(const std::string& line) {
    std::vector<std::string> out;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') return out;
    std::istringstream in(line);
    for (std::string t; in >> t;) out.push_back(t);
    return out;
}

}  // namespace detail

struct RawEdges {
    std::vector<Edge> edges;  // as read; orientation and duplicates intact
    std::size_t lines = 0;
};

/// Reads "u v" records. Tokens beyond the second (weights, timestamps) are ignored.
inline RawEdges read_edge_list(std::istream& in, NodeIndex& nodes) {
    RawEdges raw;
    std::string line;
    while (std::getline(in, line)) {
        ++raw.lines;
        const auto t = detail::tokens(line);
        if (t.empty()) continue;
        if (t.size() < 2) throw ParseError("edge record needs two node tokens", raw.lines);
        const int a = nodes.intern(t[0]);
        const int b = nodes.intern(t[1]);
        raw.edges.emplace_back(a, b);
    }
    if (in.bad()) throw IoError("read error in edge list");
    return raw;
}

/// Reads "node label" records into (node index, label token) pairs. Nodes not
/// yet known are interned. A node listed twice with different labels is an error.
inline std::vector<std::pair<int, std::string>> read_labels(std::istream& in, NodeIndex& nodes) {
    std::vector<std::pair<int, std::string>> out;
    std::unordered_map<int, std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = detail::tokens(line);
        if (t.empty()) continue;
        if (t.size() < 2) throw ParseError("label record needs a node token and a label", lineno);
        const int v = nodes.intern(t[0]);
        auto [it, inserted] = seen.try_emplace(v, t[1]);
        if (!inserted) {
            if (it->second != t[1]) throw ParseError("node '" + t[0] + "' has conflicting labels", lineno);
            continue;
        }
        out.emplace_back(v, t[1]);
    }
    if (in.bad()) throw IoError("read error in label file");
    return out;
}

/// Reads a node list (first token per line) and interns it in file order, so
/// indices survive a write/read cycle even for isolated nodes.
inline void read_node_list(std::istream& in, NodeIndex& nodes) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = detail::tokens(line);
        if (t.empty()) continue;
        const int before = nodes.size();
        if (nodes.intern(t[0]) != before) throw ParseError("node '" + t[0] + "' listed twice", lineno);
    }
    if (in.bad()) throw IoError("read error in node list");
}

struct LoadedGraph {
    Graph graph;
    NodeIndex nodes;
    EdgeCleanup cleanup;
    std::optional<Partition> labels;
    std::vector<std::string> label_names;  // label token of each cluster index
};

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return in;
}

/// Builds a Partition from (node, label-token) pairs; labels are numbered in
/// first-seen order. Every node must be labelled.
inline Partition partition_from_labels(const std::vector<std::pair<int, std::string>>& records, int n,
                                       std::vector<std::string>* label_names = nullptr) {
    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    std::unordered_map<std::string, int> ids;
    std::vector<std::string> names;
    for (const auto& [v, tok] : records) {
        auto [it, inserted] = ids.try_emplace(tok, static_cast<int>(names.size()));
        if (inserted) names.push_back(tok);
        labels.at(static_cast<std::size_t>(v)) = it->second;
    }
    for (int i = 0; i < n; ++i)
        if (labels[i] < 0) throw InputError("node index " + std::to_string(i) + " has no label");
    if (label_names) *label_names = names;
    return Partition(std::move(labels), static_cast<int>(names.size()));
}

/// Loads an edge list and optional label file. Nodes that appear only in the
/// label file are kept as isolated nodes, after the edge-list nodes. A node
/// list, when given, fixes the leading indices.
inline LoadedGraph load_graph(std::istream& edges_in, std::istream* labels_in = nullptr,
                              std::istream* nodes_in = nullptr) {
    LoadedGraph out;
    if (nodes_in) read_node_list(*nodes_in, out.nodes);
    auto raw = read_edge_list(edges_in, out.nodes);
    std::vector<std::pair<int, std::string>> records;
    if (labels_in) records = read_labels(*labels_in, out.nodes);
    if (out.nodes.size() == 0) throw InputError("graph has no nodes");
    out.graph = Graph(out.nodes.size(), std::move(raw.edges), &out.cleanup);
    if (labels_in) {
        std::vector<std::string> names;
        out.labels = partition_from_labels(records, out.nodes.size(), &names);
        out.label_names = std::move(names);
    }
    return out;
}

inline LoadedGraph load_graph(const std::string& edge_path, const std::optional<std::string>& label_path = {},
                              const std::optional<std::string>& node_path = {}) {
    auto e = open_input(edge_path);
    std::optional<std::ifstream> l, v;
    if (label_path) l = open_input(*label_path);
    if (node_path) v = open_input(*node_path);
    return load_graph(e, l ? &*l : nullptr, v ? &*v : nullptr);
}

inline void write_node_list(std::ostream& out, const NodeIndex& nodes) {
    for (const auto& name : nodes.names()) out << name << '\n';
}

/// Reads a partition file against an existing node index. Unknown nodes are
/// rejected; labels are compacted in first-seen order.
inline Partition read_partition(std::istream& in, const NodeIndex& nodes) {
    NodeIndex copy = nodes;
    auto records = read_labels(in, copy);
    if (copy.size() != nodes.size()) throw InputError("partition file names nodes absent from the graph");
    return partition_from_labels(records, nodes.size());
}

inline void write_edge_list(std::ostream& out, const Graph& graph, const NodeIndex* names = nullptr) {
    for (auto [i, j] : graph.edges()) {
        if (names)
            out << names->names()[i] << ' ' << names->names()[j] << '\n';
        else
            out << i << ' ' << j << '\n';
    }
}

/// "node label" lines with 1-based cluster labels.
inline void write_partition(std::ostream& out, const Partition& partition, const NodeIndex* names = nullptr) {
    for (int i = 0; i < partition.n(); ++i) {
        if (names)
            out << names->names()[i];
        else
            out << i;
        out << ' ' << partition[i] + 1 << '\n';
    }
}

}  // namespace ebgraph
