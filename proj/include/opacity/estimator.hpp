// Copyright (c) approx-opacity contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "opacity/error.hpp"
#include "opacity/model_io.hpp"
#include "opacity/state_set.hpp"
#include "opacity/system.hpp"

namespace opacity {

enum class EstimatorKind { Initial, Current };

[[nodiscard]] inline const char* to_string(EstimatorKind k) noexcept {
    return k == EstimatorKind::Initial ? "initial" : "current";
}

struct BuildOptions {
    /// Additive tolerance on every "d <= delta" comparison.
    double slack = 0.0;
    std::size_t node_cap = 1'000'000;
    /// Current-state estimator only: take successors of the reference state instead of the whole belief.
    bool strict_def5 = false;
};

struct EstimatorNode {
    StateIndex reference = 0;
    StateSet belief;

    friend bool operator==(const EstimatorNode&, const EstimatorNode&) = default;
    friend std::strong_ordering operator<=>(const EstimatorNode& a, const EstimatorNode& b) noexcept {
        if (const auto c = a.reference <=> b.reference; c != 0) {
            return c;
        }
        return a.belief <=> b.belief;
    }
};

struct EstimatorNodeHash {
    std::size_t operator()(const EstimatorNode& n) const noexcept { return n.belief.hash() * 31 + n.reference; }
};

using NodeId = std::size_t;

struct EstimatorEdge {
    NodeId source = 0;
    InputIndex input = 0;
    NodeId target = 0;

    friend auto operator<=>(const EstimatorEdge&, const EstimatorEdge&) = default;
};

/// Reachable fragment of the initial-state or current-state estimator.
///
/// Nodes are sorted by (reference, belief) and edges by (source, input, target), so two builds of
/// the same system are identical regardless of exploration order. The estimator keeps a
/// non-owning pointer to its source system, which must outlive it.
class Estimator {
  public:
    [[nodiscard]] EstimatorKind kind() const noexcept { return kind_; }
    [[nodiscard]] double delta() const noexcept { return delta_; }
    [[nodiscard]] double slack() const noexcept { return slack_; }
    [[nodiscard]] const MetricSystem& system() const noexcept { return *system_; }

    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    [[nodiscard]] const std::vector<EstimatorNode>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] const EstimatorNode& node(NodeId id) const { return nodes_.at(id); }
    /// Initial node ids, ascending.
    [[nodiscard]] const std::vector<NodeId>& initial_nodes() const noexcept { return initial_; }
    [[nodiscard]] bool is_initial(NodeId id) const { return std::binary_search(initial_.begin(), initial_.end(), id); }
    [[nodiscard]] const std::vector<EstimatorEdge>& edges() const noexcept { return edges_; }
    [[nodiscard]] std::span<const EstimatorEdge> out_edges(NodeId id) const {
        return {edges_.data() + offsets_[id], edges_.data() + offsets_[id + 1]};
    }

    [[nodiscard]] std::optional<NodeId> find(const EstimatorNode& n) const {
        const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), n);
        if (it == nodes_.end() || *it != n) {
            return std::nullopt;
        }
        return static_cast<NodeId>(it - nodes_.begin());
    }

    friend bool operator==(const Estimator& a, const Estimator& b) {
        return a.kind_ == b.kind_ && a.delta_ == b.delta_ && a.nodes_ == b.nodes_ && a.initial_ == b.initial_ &&
               a.edges_ == b.edges_;
    }

  private:
    friend Estimator build_estimator(const MetricSystem&, EstimatorKind, double, const BuildOptions&);

    EstimatorKind kind_ = EstimatorKind::Initial;
    double delta_ = 0.0;
    double slack_ = 0.0;
    const MetricSystem* system_ = nullptr;
    std::vector<EstimatorNode> nodes_;
    std::vector<NodeId> initial_;
    std::vector<EstimatorEdge> edges_;
    std::vector<std::size_t> offsets_;
};

/// Breadth-first construction of the reachable estimator fragment.
[[nodiscard]] inline Estimator build_estimator(const MetricSystem& s, EstimatorKind kind, double delta,
                                               const BuildOptions& opts = {}) {
    if (!(delta >= 0.0)) {
        throw PreconditionError("delta must be nonnegative");
    }
    const auto close = close_sets(s, delta, opts.slack);

    std::vector<EstimatorNode> nodes;
    std::unordered_map<EstimatorNode, NodeId, EstimatorNodeHash> ids;
    std::vector<EstimatorEdge> edges;
    std::vector<NodeId> initial;

    const auto intern = [&](EstimatorNode n) -> NodeId {
        const auto [it, inserted] = ids.emplace(n, nodes.size());
        if (inserted) {
            if (nodes.size() >= opts.node_cap) {
                throw BudgetExceeded("estimator node cap of " + std::to_string(opts.node_cap) + " exceeded");
            }
            nodes.push_back(std::move(n));
        }
        return it->second;
    };

    if (kind == EstimatorKind::Initial) {
        for (StateIndex x = 0; x < s.size(); ++x) {
            initial.push_back(intern({x, close[x]}));
        }
    } else {
        s.initial_states().for_each(
            [&](StateIndex x) { initial.push_back(intern({x, close[x] & s.initial_states()})); });
    }

    for (NodeId cur = 0; cur < nodes.size(); ++cur) {
        const StateIndex x = nodes[cur].reference;
        StateSet image(s.size());
        if (kind == EstimatorKind::Initial) {
            image = pre_set_any(s, nodes[cur].belief);
        } else if (opts.strict_def5) {
            image = s.post_any(x);
        } else {
            image = post_set_any(s, nodes[cur].belief);
        }
        for (InputIndex u = 0; u < s.input_count(); ++u) {
            const auto next = kind == EstimatorKind::Initial ? s.pre(x, u) : s.post(x, u);
            for (const auto y : next) {
                const NodeId target = intern({y, image & close[y]});
                edges.push_back({cur, u, target});
            }
        }
    }

    // Canonical renumbering.
    std::vector<NodeId> order(nodes.size());
    for (NodeId i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return nodes[a] < nodes[b]; });
    std::vector<NodeId> rank(nodes.size());
    for (NodeId i = 0; i < order.size(); ++i) {
        rank[order[i]] = i;
    }

    Estimator e;
    e.kind_ = kind;
    e.delta_ = delta;
    e.slack_ = opts.slack;
    e.system_ = &s;
    e.nodes_.reserve(nodes.size());
    for (const auto i : order) {
        e.nodes_.push_back(std::move(nodes[i]));
    }
    for (const auto i : initial) {
        e.initial_.push_back(rank[i]);
    }
    std::sort(e.initial_.begin(), e.initial_.end());
    e.initial_.erase(std::unique(e.initial_.begin(), e.initial_.end()), e.initial_.end());
    for (auto& edge : edges) {
        edge.source = rank[edge.source];
        edge.target = rank[edge.target];
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    e.edges_ = std::move(edges);
    e.offsets_.assign(e.nodes_.size() + 1, 0);
    for (const auto& edge : e.edges_) {
        ++e.offsets_[edge.source + 1];
    }
    for (std::size_t i = 0; i < e.nodes_.size(); ++i) {
        e.offsets_[i + 1] += e.offsets_[i];
    }
    return e;
}

[[nodiscard]] inline Estimator build_initial_estimator(const MetricSystem& s, double delta, const BuildOptions& opts = {}) {
    return build_estimator(s, EstimatorKind::Initial, delta, opts);
}

[[nodiscard]] inline Estimator build_current_estimator(const MetricSystem& s, double delta, const BuildOptions& opts = {}) {
    return build_estimator(s, EstimatorKind::Current, delta, opts);
}

/// Follow the estimator path from `start` whose i-th step uses `inputs[i]` and lands on reference
/// `references[i]`, returning the final belief. Throws PathError if the path does not exist.
[[nodiscard]] inline StateSet belief_after(const Estimator& e, NodeId start, std::span<const InputIndex> inputs,
                                           std::span<const StateIndex> references) {
    if (!e.is_initial(start)) {
        throw PathError("start node " + std::to_string(start) + " is not an initial estimator node");
    }
    if (inputs.size() != references.size()) {
        throw PathError("inputs and references differ in length");
    }
    NodeId cur = start;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        std::optional<NodeId> next;
        for (const auto& edge : e.out_edges(cur)) {
            if (edge.input == inputs[i] && e.node(edge.target).reference == references[i]) {
                next = edge.target;
                break;
            }
        }
        if (!next) {
            throw PathError("no estimator transition at step " + std::to_string(i + 1));
        }
        cur = *next;
    }
    return e.node(cur).belief;
}

/// Shortest paths from the initial nodes, tracked separately for zero-length and positive-length
/// paths. Layer 0 holds the initial nodes; layer 1 holds paths with at least one edge.
class EstimatorPaths {
  public:
    static constexpr std::size_t unreachable = std::numeric_limits<std::size_t>::max();

    explicit EstimatorPaths(const Estimator& e) : e_(&e) {
        const std::size_t n = e.size();
        for (auto& layer : dist_) {
            layer.assign(n, unreachable);
        }
        for (auto& layer : parent_) {
            layer.assign(n, Parent{});
        }
        std::deque<NodeId> frontier;
        for (const auto id : e.initial_nodes()) {
            dist_[0][id] = 0;
        }
        // Layer-1 BFS seeded by every edge leaving an initial node.
        for (const auto id : e.initial_nodes()) {
            relax(id, 0, frontier);
        }
        while (!frontier.empty()) {
            const NodeId cur = frontier.front();
            frontier.pop_front();
            relax(cur, 1, frontier);
        }
    }

    /// Length of the shortest path ending at `id` with the given positivity, or `unreachable`.
    [[nodiscard]] std::size_t distance(NodeId id, bool positive) const { return dist_[positive ? 1 : 0][id]; }

    /// Shortest path to `id` as an ordered edge list (empty for the zero-length path).
    [[nodiscard]] std::vector<EstimatorEdge> path(NodeId id, bool positive) const {
        std::vector<EstimatorEdge> out;
        if (dist_[positive ? 1 : 0][id] == unreachable) {
            throw PathError("node is not reachable with the requested path length");
        }
        std::size_t layer = positive ? 1 : 0;
        NodeId cur = id;
        while (layer == 1) {
            const auto& p = parent_[1][cur];
            out.push_back(p.edge);
            layer = p.layer;
            cur = p.edge.source;
        }
        std::reverse(out.begin(), out.end());
        return out;
    }

  private:
    struct Parent {
        EstimatorEdge edge;
        std::size_t layer = 0;
    };

    void relax(NodeId cur, std::size_t layer, std::deque<NodeId>& frontier) {
        const std::size_t d = dist_[layer][cur];
        for (const auto& edge : e_->out_edges(cur)) {
            if (dist_[1][edge.target] == unreachable) {
                dist_[1][edge.target] = d + 1;
                parent_[1][edge.target] = {edge, layer};
                frontier.push_back(edge.target);
            }
        }
    }

    const Estimator* e_;
    std::vector<std::size_t> dist_[2];
    std::vector<Parent> parent_[2];
};

[[nodiscard]] inline Json to_json(const Estimator& e) {
    const auto& s = e.system();
    Json nodes = Json::array();
    for (NodeId id = 0; id < e.size(); ++id) {
        const auto& n = e.node(id);
        nodes.push_back(Json{{"id", id},
                             {"reference", s.state(n.reference).label},
                             {"belief", labels_json(s, n.belief)},
                             {"initial", e.is_initial(id)}});
    }
    Json transitions = Json::array();
    for (const auto& edge : e.edges()) {
        transitions.push_back(Json::array({edge.source, s.inputs()[edge.input], edge.target}));
    }
    return Json{{"kind", to_string(e.kind())},
                {"delta", e.delta()},
                {"nodes", std::move(nodes)},
                {"transitions", std::move(transitions)}};
}

[[nodiscard]] inline std::string node_label(const Estimator& e, NodeId id) {
    const auto& s = e.system();
    const auto& n = e.node(id);
    std::string out = "(" + s.state(n.reference).label + ",{";
    bool first = true;
    n.belief.for_each([&](StateIndex x) {
        out += (first ? "" : ",") + s.state(x).label;
        first = false;
    });
    return out + "})";
}

/// Graphviz rendering; initial nodes are drawn with a double border.
[[nodiscard]] inline std::string to_dot(const Estimator& e) {
    const auto quote = [](const std::string& text) {
        std::string out = "\"";
        for (const char c : text) {
            if (c == '"' || c == '\\') {
                out += '\\';
            }
            out += c;
        }
        return out + "\"";
    };
    std::string out = std::string("digraph ") + (e.kind() == EstimatorKind::Initial ? "S_I" : "S_C") + " {\n";
    out += "  rankdir=LR;\n";
    for (NodeId id = 0; id < e.size(); ++id) {
        out += "  n" + std::to_string(id) + " [label=" + quote(node_label(e, id)) +
               (e.is_initial(id) ? ", peripheries=2" : "") + "];\n";
    }
    for (const auto& edge : e.edges()) {
        out += "  n" + std::to_string(edge.source) + " -> n" + std::to_string(edge.target) +
               " [label=" + quote(e.system().inputs()[edge.input]) + "];\n";
    }
    return out + "}\n";
}

} // namespace opacity
