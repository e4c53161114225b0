// Copyright (c) approx-opacity contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "opacity/estimator.hpp"
#include "opacity/oracle.hpp"
#include "opacity/verify.hpp"

namespace opacity::testing {

struct CrosscheckReport {
    std::size_t comparisons = 0;
    std::size_t disagreements = 0;
    std::vector<std::string> details;

    void fail(std::string what) {
        ++disagreements;
        if (details.size() < 10) {
            details.push_back(std::move(what));
        }
    }
};

/// Compare verify_* with the brute-force oracle for all three properties at every candidate delta.
/// The oracle depth is the estimator node count (the sum of both counts for infinite-step),
/// which bounds the length of a shortest violation.
inline void crosscheck_verdicts(const MetricSystem& s, std::size_t system_id, CrosscheckReport& report) {
    for (const double d : candidate_deltas(s)) {
        for (const auto p : {Property::Initial, Property::Current, Property::Infinite}) {
            const auto v = verify(s, p, d);
            const std::size_t depth = v.stats.initial_estimator_nodes + v.stats.current_estimator_nodes;
            const auto o = oracle_opacity(s, d, p, depth);
            ++report.comparisons;
            std::ostringstream where;
            where << "system " << system_id << " delta " << d << " property " << to_string(p);
            if (v.holds != o.holds_up_to_depth) {
                report.fail(where.str() + ": verifier " + (v.holds ? "holds" : "fails") + ", oracle " +
                            (o.holds_up_to_depth ? "holds" : "fails"));
                continue;
            }
            if (!v.holds && v.witness->run.length() != o.witness->run.length()) {
                report.fail(where.str() + ": witness lengths differ");
            }
        }
    }
}

/// Enumerate every estimator path of length <= depth from each initial node.
inline void for_each_path(const Estimator& e, std::size_t depth,
                          const std::function<void(NodeId, const std::vector<EstimatorEdge>&)>& visit) {
    std::vector<EstimatorEdge> path;
    std::function<void(NodeId)> rec = [&](NodeId cur) {
        visit(cur, path);
        if (path.size() == depth) {
            return;
        }
        for (const auto& edge : e.out_edges(cur)) {
            path.push_back(edge);
            rec(edge.target);
            path.pop_back();
        }
    };
    for (const auto id : e.initial_nodes()) {
        rec(id);
    }
}

/// belief_after on every path of both estimators versus the oracle's run-level characterisation.
inline void crosscheck_beliefs(const MetricSystem& s, double delta, std::size_t depth, std::size_t system_id,
                               CrosscheckReport& report) {
    for (const auto kind : {EstimatorKind::Initial, EstimatorKind::Current}) {
        const auto e = build_estimator(s, kind, delta);
        for_each_path(e, depth, [&](NodeId end, const std::vector<EstimatorEdge>& path) {
            const NodeId start = path.empty() ? end : path.front().source;
            std::vector<InputIndex> inputs;
            std::vector<StateIndex> refs;
            Run run;
            run.states.push_back(e.node(start).reference);
            for (const auto& edge : path) {
                inputs.push_back(edge.input);
                refs.push_back(e.node(edge.target).reference);
                run.states.push_back(e.node(edge.target).reference);
                run.inputs.push_back(edge.input);
            }
            if (kind == EstimatorKind::Initial) {
                std::reverse(run.states.begin(), run.states.end());
                std::reverse(run.inputs.begin(), run.inputs.end());
            }
            ++report.comparisons;
            const auto replayed = belief_after(e, start, inputs, refs);
            const auto expected = oracle_belief(s, delta, kind, run);
            if (replayed != expected || replayed != e.node(end).belief) {
                std::ostringstream where;
                where << "system " << system_id << " delta " << delta << " " << to_string(kind) << " path length "
                      << path.size();
                report.fail(where.str());
            }
        });
    }
}

} // namespace opacity::testing
