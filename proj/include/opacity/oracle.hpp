// Copyright (c) approx-opacity contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "opacity/error.hpp"
#include "opacity/state_set.hpp"
#include "opacity/system.hpp"
#include "opacity/verify.hpp"

// Brute-force checker that works directly from the opacity definitions. It shares only the
// MetricSystem primitives with the estimator-based verifier and is used to certify it.

namespace opacity {

struct OracleOptions {
    double slack = 0.0;
    /// Maximum number of run prefixes examined before BudgetExceeded is raised.
    std::size_t budget = 10'000'000;
};

struct OracleVerdict {
    Property property = Property::Initial;
    double delta = 0.0;
    std::size_t depth = 0;
    /// No violating run of length <= depth exists.
    bool holds_up_to_depth = true;
    /// Every distinct prefix class was explored, so the verdict holds for all lengths.
    bool exhaustive = false;
    /// First positive-length violation in breadth-first order, else a zero-length one.
    std::optional<Witness> witness;
    std::size_t prefixes_explored = 0;
};

namespace detail {

inline bool close_enough(const MetricSystem& s, StateIndex a, StateIndex b, double bound) {
    return s.distance(a, b) <= bound;
}

/// All states y with some transition x -> y for x in `from`, filtered to those within `bound` of `ref`.
inline StateSet step_matching(const MetricSystem& s, const StateSet& from, StateIndex ref, double bound) {
    StateSet out(s.size());
    from.for_each([&](StateIndex x) {
        for (InputIndex u = 0; u < s.input_count(); ++u) {
            for (const auto y : s.post(x, u)) {
                if (close_enough(s, ref, y, bound)) {
                    out.insert(y);
                }
            }
        }
    });
    return out;
}

inline StateSet within(const MetricSystem& s, const StateSet& candidates, StateIndex ref, double bound) {
    StateSet out(s.size());
    candidates.for_each([&](StateIndex y) {
        if (close_enough(s, ref, y, bound)) {
            out.insert(y);
        }
    });
    return out;
}

/// Prefix summary. Two prefixes with equal keys have identical violation status for every
/// common continuation, so only the first one reached needs to be extended.
struct PrefixKey {
    StateIndex last = 0;
    bool positive = false;
    /// Initial: endpoints of matching runs from non-secret initial states.
    /// Current / infinite: endpoints of all matching runs from initial states.
    StateSet all;
    /// Infinite only: for every secret instant k, endpoints of matching runs non-secret at k.
    std::vector<StateSet> at_secret;

    friend bool operator<(const PrefixKey& a, const PrefixKey& b) {
        if (a.last != b.last) {
            return a.last < b.last;
        }
        if (a.positive != b.positive) {
            return a.positive < b.positive;
        }
        if (a.all != b.all) {
            return a.all < b.all;
        }
        return a.at_secret < b.at_secret;
    }
};

struct Prefix {
    PrefixKey key;
    std::size_t parent = 0;
    InputIndex input = 0;
    std::size_t length = 0;
};

inline void normalize(std::vector<StateSet>& sets) {
    std::sort(sets.begin(), sets.end());
    sets.erase(std::unique(sets.begin(), sets.end()), sets.end());
}

inline bool violates(const MetricSystem& s, Property p, const PrefixKey& k) {
    switch (p) {
    case Property::Initial:
        return k.all.empty();
    case Property::Current:
        return s.is_secret(k.last) && k.all.is_subset_of(s.secret_states());
    case Property::Infinite:
        return std::any_of(k.at_secret.begin(), k.at_secret.end(), [](const StateSet& g) { return g.empty(); });
    }
    return false;
}

inline Run rebuild_run(const std::vector<Prefix>& store, std::size_t id) {
    Run run;
    for (std::size_t cur = id;; cur = store[cur].parent) {
        run.states.push_back(store[cur].key.last);
        if (store[cur].length == 0) {
            break;
        }
        run.inputs.push_back(store[cur].input);
    }
    std::reverse(run.states.begin(), run.states.end());
    std::reverse(run.inputs.begin(), run.inputs.end());
    return run;
}

} // namespace detail

/// Explore all runs of length <= depth breadth-first and test the opacity definition on each.
[[nodiscard]] inline OracleVerdict oracle_opacity(const MetricSystem& s, double delta, Property p, std::size_t depth,
                                                  const OracleOptions& opts = {}) {
    using namespace detail;
    if (!(delta >= 0.0)) {
        throw PreconditionError("delta must be nonnegative");
    }
    const double bound = threshold(delta, opts.slack);
    OracleVerdict v;
    v.property = p;
    v.delta = delta;
    v.depth = depth;

    const StateSet non_secret_initial = s.initial_states() - s.secret_states();
    std::vector<Prefix> store;
    std::set<PrefixKey> seen;
    std::deque<std::size_t> frontier;
    std::optional<std::size_t> zero_violation;

    const auto admit = [&](Prefix&& pre) -> std::optional<std::size_t> {
        if (!seen.insert(pre.key).second) {
            return std::nullopt;
        }
        if (++v.prefixes_explored > opts.budget) {
            throw BudgetExceeded("oracle budget of " + std::to_string(opts.budget) + " prefixes exceeded");
        }
        store.push_back(std::move(pre));
        return store.size() - 1;
    };

    s.initial_states().for_each([&](StateIndex x0) {
        if (p == Property::Initial && !s.is_secret(x0)) {
            return;
        }
        Prefix pre;
        pre.key.last = x0;
        pre.key.all = within(s, p == Property::Initial ? non_secret_initial : s.initial_states(), x0, bound);
        if (p == Property::Infinite && s.is_secret(x0)) {
            pre.key.at_secret.push_back(pre.key.all - s.secret_states());
        }
        if (const auto id = admit(std::move(pre))) {
            if (violates(s, p, store[*id].key) && !zero_violation) {
                zero_violation = *id;
            }
            frontier.push_back(*id);
        }
    });

    std::optional<std::size_t> positive_violation;
    while (!frontier.empty() && !positive_violation) {
        const std::size_t id = frontier.front();
        frontier.pop_front();
        if (store[id].length >= depth) {
            continue;
        }
        const StateIndex x = store[id].key.last;
        for (InputIndex u = 0; u < s.input_count() && !positive_violation; ++u) {
            for (const auto y : s.post(x, u)) {
                const PrefixKey& parent = store[id].key;
                Prefix next;
                next.parent = id;
                next.input = u;
                next.length = store[id].length + 1;
                next.key.last = y;
                next.key.positive = true;
                next.key.all = step_matching(s, parent.all, y, bound);
                if (p == Property::Infinite) {
                    for (const auto& g : parent.at_secret) {
                        next.key.at_secret.push_back(step_matching(s, g, y, bound));
                    }
                    if (s.is_secret(y)) {
                        next.key.at_secret.push_back(next.key.all - s.secret_states());
                    }
                    normalize(next.key.at_secret);
                }
                const auto nid = admit(std::move(next));
                if (!nid) {
                    continue;
                }
                if (violates(s, p, store[*nid].key)) {
                    positive_violation = *nid;
                    break;
                }
                frontier.push_back(*nid);
            }
        }
    }

    const auto pick = positive_violation ? positive_violation : zero_violation;
    v.holds_up_to_depth = !pick.has_value();
    v.exhaustive = frontier.empty() && !positive_violation &&
                   std::none_of(store.begin(), store.end(), [&](const Prefix& pr) { return pr.length >= depth; });
    if (pick) {
        Witness w;
        w.run = rebuild_run(store, *pick);
        if (p == Property::Current) {
            w.secret_index = w.run.length();
        } else if (p == Property::Infinite) {
            w.secret_index = 0;
            // Locate the exposed instant directly from the definition.
            for (std::size_t k = 0; k < w.run.states.size(); ++k) {
                if (s.is_secret(w.run.states[k])) {
                    StateSet reach = within(s, s.initial_states(), w.run.states[0], bound);
                    if (k == 0) {
                        reach -= s.secret_states();
                    }
                    for (std::size_t i = 1; i < w.run.states.size() && !reach.empty(); ++i) {
                        reach = step_matching(s, reach, w.run.states[i], bound);
                        if (i == k) {
                            reach -= s.secret_states();
                        }
                    }
                    if (reach.empty()) {
                        w.secret_index = k;
                        break;
                    }
                }
            }
        }
        v.witness = std::move(w);
    }
    return v;
}

/// Endpoint set from matching runs, computed from the run itself.
///
/// kind Initial: start states x'_0 in X of runs x'_0 .. x'_n with d(H(x_i), H(x'_i)) <= delta for all i.
/// kind Current: end states x'_n of such runs that start in X0.
[[nodiscard]] inline StateSet oracle_belief(const MetricSystem& s, double delta, EstimatorKind kind, const Run& run,
                                            const OracleOptions& opts = {}) {
    using namespace detail;
    if (!is_valid_run(s, run)) {
        throw PreconditionError("reference run is not a run of the system");
    }
    const double bound = threshold(delta, opts.slack);
    const std::size_t n = run.length();
    if (kind == EstimatorKind::Current) {
        StateSet layer = within(s, s.initial_states(), run.states[0], bound);
        for (std::size_t i = 1; i <= n; ++i) {
            layer = step_matching(s, layer, run.states[i], bound);
        }
        return layer;
    }
    // Backward layers: states at position i from which a matching suffix exists.
    StateSet layer = within(s, StateSet::full(s.size()), run.states[n], bound);
    for (std::size_t i = n; i-- > 0;) {
        StateSet prev(s.size());
        for (StateIndex x = 0; x < s.size(); ++x) {
            if (!close_enough(s, run.states[i], x, bound)) {
                continue;
            }
            bool extends = false;
            for (InputIndex u = 0; u < s.input_count() && !extends; ++u) {
                for (const auto y : s.post(x, u)) {
                    if (layer.contains(y)) {
                        extends = true;
                        break;
                    }
                }
            }
            if (extends) {
                prev.insert(x);
            }
        }
        layer = std::move(prev);
    }
    return layer;
}

/// Definition-level check of one run. `k` is the secret instant for infinite-step; it is ignored
/// for the other properties (instant 0 for initial-state, the last instant for current-state).
[[nodiscard]] inline bool run_violates(const MetricSystem& s, double delta, Property p, const Run& run, std::size_t k = 0,
                                       const OracleOptions& opts = {}) {
    using namespace detail;
    if (!is_valid_run(s, run) || !s.is_initial(run.states[0])) {
        return false;
    }
    const double bound = threshold(delta, opts.slack);
    const std::size_t n = run.length();
    std::size_t exposed = 0;
    switch (p) {
    case Property::Initial:
        exposed = 0;
        break;
    case Property::Current:
        exposed = n;
        break;
    case Property::Infinite:
        if (k > n) {
            return false;
        }
        exposed = k;
        break;
    }
    if (!s.is_secret(run.states[exposed])) {
        return false;
    }
    StateSet layer = within(s, s.initial_states(), run.states[0], bound);
    if (exposed == 0) {
        layer -= s.secret_states();
    }
    for (std::size_t i = 1; i <= n; ++i) {
        layer = step_matching(s, layer, run.states[i], bound);
        if (i == exposed) {
            layer -= s.secret_states();
        }
    }
    return layer.empty();
}

[[nodiscard]] inline Json to_json(const MetricSystem& s, const OracleVerdict& v) {
    Json doc;
    doc["property"] = to_string(v.property);
    doc["delta"] = v.delta;
    doc["depth"] = v.depth;
    doc["holds_up_to_depth"] = v.holds_up_to_depth;
    doc["exhaustive"] = v.exhaustive;
    if (v.witness) {
        Json w = run_json(s, v.witness->run);
        w["secret_index"] = v.witness->secret_index;
        doc["witness"] = std::move(w);
    } else {
        doc["witness"] = nullptr;
    }
    doc["prefixes_explored"] = v.prefixes_explored;
    return doc;
}

} // namespace opacity
