// Copyright (c) approx-opacity contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "opacity/error.hpp"
#include "opacity/estimator.hpp"
#include "opacity/model_io.hpp"
#include "opacity/system.hpp"

namespace opacity {

enum class Property { Initial, Current, Infinite };

[[nodiscard]] inline const char* to_string(Property p) noexcept {
    switch (p) {
    case Property::Initial:
        return "initial";
    case Property::Current:
        return "current";
    case Property::Infinite:
        return "infinite";
    }
    return "?";
}

[[nodiscard]] inline Property parse_property(const std::string& text) {
    if (text == "initial") {
        return Property::Initial;
    }
    if (text == "current") {
        return Property::Current;
    }
    if (text == "infinite") {
        return Property::Infinite;
    }
    throw PreconditionError("unknown property \"" + text + "\" (expected initial, current or infinite)");
}

/// A violating run. `secret_index` is the instant whose secrecy is exposed: 0 for initial-state,
/// the last instant for current-state, and the splice point for infinite-step violations.
struct Witness {
    Run run;
    std::size_t secret_index = 0;
};

struct VerdictStats {
    std::size_t initial_estimator_nodes = 0;
    std::size_t initial_estimator_transitions = 0;
    std::size_t current_estimator_nodes = 0;
    std::size_t current_estimator_transitions = 0;
};

struct OpacityVerdict {
    Property property = Property::Initial;
    double delta = 0.0;
    bool holds = true;
    /// The standing non-triviality assumption fails at `delta`.
    bool trivially_failed = false;
    std::optional<StateIndex> trivial_state;
    /// Present iff `holds` is false. Shortest positive-length violation when one exists,
    /// otherwise the zero-length run at a trivially exposed initial state.
    std::optional<Witness> witness;
    VerdictStats stats;
};

namespace detail {

inline void require_delta(double delta) {
    if (!(delta >= 0.0)) {
        throw PreconditionError("delta must be nonnegative");
    }
}

/// Among `failing` nodes pick the one with the shortest positive-length path, falling back to
/// the shortest zero-length path. Ties go to the smallest node id.
inline std::optional<std::pair<NodeId, bool>> pick_violation(const EstimatorPaths& paths,
                                                             const std::vector<NodeId>& failing) {
    std::optional<std::pair<NodeId, bool>> best;
    std::size_t best_len = EstimatorPaths::unreachable;
    for (const auto id : failing) {
        const auto d = paths.distance(id, true);
        if (d < best_len) {
            best_len = d;
            best = {id, true};
        }
    }
    if (best) {
        return best;
    }
    for (const auto id : failing) {
        if (paths.distance(id, false) == 0) {
            return std::pair{id, false};
        }
    }
    return std::nullopt;
}

/// Reference run of a current-state estimator path, forward.
inline Run forward_run(const Estimator& e, NodeId end, const std::vector<EstimatorEdge>& path) {
    Run run;
    run.states.push_back(path.empty() ? e.node(end).reference : e.node(path.front().source).reference);
    for (const auto& edge : path) {
        run.inputs.push_back(edge.input);
        run.states.push_back(e.node(edge.target).reference);
    }
    return run;
}

/// System run encoded by an initial-state estimator path: the reference sequence read backwards.
inline Run backward_run(const Estimator& e, NodeId end, const std::vector<EstimatorEdge>& path) {
    Run forward = forward_run(e, end, path);
    std::reverse(forward.states.begin(), forward.states.end());
    std::reverse(forward.inputs.begin(), forward.inputs.end());
    return forward;
}

inline void fill_trivial(const MetricSystem& s, double delta, double slack, OpacityVerdict& v) {
    const auto nt = check_nontriviality(s, delta, slack);
    v.trivially_failed = !nt.passed;
    v.trivial_state = nt.offending_state;
}

inline void check_consistency(const OpacityVerdict& v) {
    if (v.trivially_failed && v.holds) {
        throw std::logic_error("verdict holds although the non-triviality assumption fails");
    }
}

} // namespace detail

/// Initial-state opacity: fails iff some reachable initial-state estimator node has a reference in
/// X0 ∩ XS and a belief whose initial members are all secret.
[[nodiscard]] inline OpacityVerdict verify_initial_state(const MetricSystem& s, double delta,
                                                         const BuildOptions& opts = {}) {
    detail::require_delta(delta);
    OpacityVerdict v;
    v.property = Property::Initial;
    v.delta = delta;
    detail::fill_trivial(s, delta, opts.slack, v);

    const auto est = build_initial_estimator(s, delta, opts);
    v.stats.initial_estimator_nodes = est.size();
    v.stats.initial_estimator_transitions = est.edges().size();

    const auto secret_initial = s.initial_states() & s.secret_states();
    std::vector<NodeId> failing;
    for (NodeId id = 0; id < est.size(); ++id) {
        const auto& n = est.node(id);
        if (secret_initial.contains(n.reference) && (n.belief & s.initial_states()).is_subset_of(s.secret_states())) {
            failing.push_back(id);
        }
    }
    v.holds = failing.empty();
    if (!v.holds) {
        const EstimatorPaths paths(est);
        const auto [id, positive] = *detail::pick_violation(paths, failing);
        v.witness = Witness{detail::backward_run(est, id, paths.path(id, positive)), 0};
    }
    detail::check_consistency(v);
    return v;
}

/// Current-state opacity: fails iff some reachable current-state estimator node has an all-secret belief.
[[nodiscard]] inline OpacityVerdict verify_current_state(const MetricSystem& s, double delta,
                                                         const BuildOptions& opts = {}) {
    detail::require_delta(delta);
    OpacityVerdict v;
    v.property = Property::Current;
    v.delta = delta;
    detail::fill_trivial(s, delta, opts.slack, v);

    const auto est = build_current_estimator(s, delta, opts);
    v.stats.current_estimator_nodes = est.size();
    v.stats.current_estimator_transitions = est.edges().size();

    std::vector<NodeId> failing;
    for (NodeId id = 0; id < est.size(); ++id) {
        if (est.node(id).belief.is_subset_of(s.secret_states())) {
            failing.push_back(id);
        }
    }
    v.holds = failing.empty();
    if (!v.holds) {
        const EstimatorPaths paths(est);
        const auto [id, positive] = *detail::pick_violation(paths, failing);
        auto run = detail::forward_run(est, id, paths.path(id, positive));
        const auto k = run.length();
        v.witness = Witness{std::move(run), k};
    }
    detail::check_consistency(v);
    return v;
}

/// Infinite-step opacity: fails iff some initial-state estimator node and some current-state
/// estimator node share a secret reference and the intersection of their beliefs is all secret.
/// The two nodes need not be reachable under a common input word.
[[nodiscard]] inline OpacityVerdict verify_infinite_step(const MetricSystem& s, double delta,
                                                         const BuildOptions& opts = {}) {
    detail::require_delta(delta);
    OpacityVerdict v;
    v.property = Property::Infinite;
    v.delta = delta;
    detail::fill_trivial(s, delta, opts.slack, v);

    const auto ei = build_initial_estimator(s, delta, opts);
    const auto ec = build_current_estimator(s, delta, opts);
    v.stats.initial_estimator_nodes = ei.size();
    v.stats.initial_estimator_transitions = ei.edges().size();
    v.stats.current_estimator_nodes = ec.size();
    v.stats.current_estimator_transitions = ec.edges().size();

    // Both node lists are sorted by reference, so nodes sharing a reference are contiguous.
    const auto ranges = [&](const Estimator& e) {
        std::vector<std::pair<NodeId, NodeId>> r(s.size(), {0, 0});
        for (NodeId id = 0; id < e.size();) {
            NodeId end = id;
            while (end < e.size() && e.node(end).reference == e.node(id).reference) {
                ++end;
            }
            r[e.node(id).reference] = {id, end};
            id = end;
        }
        return r;
    };
    const auto ri = ranges(ei);
    const auto rc = ranges(ec);

    std::optional<EstimatorPaths> pi;
    std::optional<EstimatorPaths> pc;
    constexpr auto inf = EstimatorPaths::unreachable;
    struct Choice {
        NodeId c = 0;
        bool c_positive = false;
        NodeId i = 0;
        bool i_positive = false;
    };
    std::optional<Choice> best;
    std::pair<int, std::size_t> best_key{2, inf};

    s.secret_states().for_each([&](StateIndex x) {
        for (NodeId c = rc[x].first; c < rc[x].second; ++c) {
            for (NodeId i = ri[x].first; i < ri[x].second; ++i) {
                if (!(ec.node(c).belief & ei.node(i).belief).is_subset_of(s.secret_states())) {
                    continue;
                }
                if (!pi) {
                    pi.emplace(ei);
                    pc.emplace(ec);
                }
                const std::size_t c0 = pc->distance(c, false);
                const std::size_t c1 = pc->distance(c, true);
                const std::size_t i0 = pi->distance(i, false);
                const std::size_t i1 = pi->distance(i, true);
                // Candidate splits (forward part, backward part), preferring positive total length.
                const std::pair<std::size_t, std::size_t> options[] = {{c0, i0}, {c0, i1}, {c1, i0}, {c1, i1}};
                const bool positive_flags[][2] = {{false, false}, {false, true}, {true, false}, {true, true}};
                for (std::size_t k = 0; k < 4; ++k) {
                    const auto [a, b] = options[k];
                    if (a == inf || b == inf) {
                        continue;
                    }
                    const std::size_t len = a + b;
                    const std::pair<int, std::size_t> key{len > 0 ? 0 : 1, len};
                    if (!best || key < best_key) {
                        best = Choice{c, positive_flags[k][0], i, positive_flags[k][1]};
                        best_key = key;
                    }
                }
            }
        }
    });

    v.holds = !best.has_value();
    if (best) {
        const Run head = detail::forward_run(ec, best->c, pc->path(best->c, best->c_positive));
        const Run tail = detail::backward_run(ei, best->i, pi->path(best->i, best->i_positive));
        Witness w;
        w.run = head;
        w.secret_index = head.length();
        w.run.states.insert(w.run.states.end(), tail.states.begin() + 1, tail.states.end());
        w.run.inputs.insert(w.run.inputs.end(), tail.inputs.begin(), tail.inputs.end());
        v.witness = std::move(w);
    }
    detail::check_consistency(v);
    return v;
}

[[nodiscard]] inline OpacityVerdict verify(const MetricSystem& s, Property p, double delta, const BuildOptions& opts = {}) {
    switch (p) {
    case Property::Initial:
        return verify_initial_state(s, delta, opts);
    case Property::Current:
        return verify_current_state(s, delta, opts);
    case Property::Infinite:
        return verify_infinite_step(s, delta, opts);
    }
    throw std::logic_error("unreachable property");
}

/// Least delta among {0} ∪ {pairwise output distances} at which `p` holds, or nullopt if it fails
/// even at the largest. Verdicts are monotone in delta and only change at those values, so a
/// binary search over the sorted candidates suffices.
[[nodiscard]] inline std::optional<double> opacity_threshold(const MetricSystem& s, Property p,
                                                             const BuildOptions& opts = {}) {
    const auto candidates = candidate_deltas(s);
    if (!verify(s, p, candidates.back(), opts).holds) {
        return std::nullopt;
    }
    std::size_t lo = 0;
    std::size_t hi = candidates.size() - 1;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (verify(s, p, candidates[mid], opts).holds) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    return candidates[lo];
}

[[nodiscard]] inline Json to_json(const MetricSystem& s, const OpacityVerdict& v) {
    Json doc;
    doc["property"] = to_string(v.property);
    doc["delta"] = v.delta;
    doc["holds"] = v.holds;
    doc["trivially_failed"] = v.trivially_failed;
    if (v.trivial_state) {
        doc["trivial_state"] = s.state(*v.trivial_state).label;
    }
    if (v.witness) {
        Json w = run_json(s, v.witness->run);
        w["secret_index"] = v.witness->secret_index;
        doc["witness"] = std::move(w);
    } else {
        doc["witness"] = nullptr;
    }
    Json stats;
    if (v.property != Property::Current) {
        stats["initial_estimator_nodes"] = v.stats.initial_estimator_nodes;
        stats["initial_estimator_transitions"] = v.stats.initial_estimator_transitions;
    }
    if (v.property != Property::Initial) {
        stats["current_estimator_nodes"] = v.stats.current_estimator_nodes;
        stats["current_estimator_transitions"] = v.stats.current_estimator_transitions;
    }
    doc["stats"] = std::move(stats);
    return doc;
}

} // namespace opacity
