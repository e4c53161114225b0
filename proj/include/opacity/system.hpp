// Copyright (c) approx-opacity contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "opacity/error.hpp"
#include "opacity/state_set.hpp"

namespace opacity {

struct StateRecord {
    std::string label;
    std::vector<double> output;
    bool initial = false;
    bool secret = false;
};

struct Transition {
    StateIndex source = 0;
    InputIndex input = 0;
    StateIndex target = 0;

    friend auto operator<=>(const Transition&, const Transition&) = default;
};

/// One entry of an explicit output-distance table.
struct DistanceEntry {
    StateIndex a = 0;
    StateIndex b = 0;
    double distance = 0.0;
};

/// A finite run x0 -u1-> x1 -u2-> ... -un-> xn. `inputs.size() == states.size() - 1`.
struct Run {
    std::vector<StateIndex> states;
    std::vector<InputIndex> inputs;

    [[nodiscard]] std::size_t length() const noexcept { return inputs.size(); }
    friend bool operator==(const Run&, const Run&) = default;
};

/// Threshold used for every "d <= delta" comparison: delta plus the user's additive slack.
[[nodiscard]] inline double threshold(double delta, double slack) noexcept { return delta + slack; }

/// Finite metric transition system with secret states.
///
/// Immutable after construction. The constructor enforces the model invariants: a common output
/// dimension m >= 1, in-range and duplicate-free transitions, at least one initial state, and a
/// complete symmetric nonnegative distance table (zero diagonal) when a table metric is used.
class MetricSystem {
  public:
    MetricSystem(std::vector<StateRecord> states, std::vector<std::string> inputs,
                 std::vector<Transition> transitions, std::optional<std::vector<DistanceEntry>> table = std::nullopt)
        : states_(std::move(states)), inputs_(std::move(inputs)), transitions_(std::move(transitions)) {
        validate_states();
        validate_inputs();
        validate_transitions();
        build_adjacency();
        if (table) {
            build_table(*table);
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return states_.size(); }
    [[nodiscard]] std::size_t input_count() const noexcept { return inputs_.size(); }
    [[nodiscard]] std::size_t output_dim() const noexcept { return states_.front().output.size(); }

    [[nodiscard]] const std::vector<StateRecord>& states() const noexcept { return states_; }
    [[nodiscard]] const StateRecord& state(StateIndex x) const { return states_.at(x); }
    [[nodiscard]] const std::vector<std::string>& inputs() const noexcept { return inputs_; }
    /// Transitions in ascending (source, input, target) order.
    [[nodiscard]] const std::vector<Transition>& transitions() const noexcept { return transitions_; }

    [[nodiscard]] const StateSet& initial_states() const noexcept { return initial_; }
    [[nodiscard]] const StateSet& secret_states() const noexcept { return secret_; }
    [[nodiscard]] bool is_initial(StateIndex x) const { return initial_.contains(x); }
    [[nodiscard]] bool is_secret(StateIndex x) const { return secret_.contains(x); }

    [[nodiscard]] bool has_distance_table() const noexcept { return !table_.empty(); }

    [[nodiscard]] std::optional<StateIndex> find_state(const std::string& label) const {
        const auto it = state_index_.find(label);
        if (it == state_index_.end()) {
            return std::nullopt;
        }
        return it->second;
    }
    [[nodiscard]] std::optional<InputIndex> find_input(const std::string& label) const {
        const auto it = input_index_.find(label);
        if (it == input_index_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    /// u-successors of x, ascending.
    [[nodiscard]] std::span<const StateIndex> post(StateIndex x, InputIndex u) const { return post_[x * inputs_.size() + u]; }
    /// u-predecessors of x, ascending.
    [[nodiscard]] std::span<const StateIndex> pre(StateIndex x, InputIndex u) const { return pre_[x * inputs_.size() + u]; }
    /// Successors of x under any input.
    [[nodiscard]] const StateSet& post_any(StateIndex x) const { return post_any_[x]; }
    /// Predecessors of x under any input.
    [[nodiscard]] const StateSet& pre_any(StateIndex x) const { return pre_any_[x]; }

    /// d(H(x), H(y)): the table entry if a table is present, otherwise the infinity norm.
    [[nodiscard]] double distance(StateIndex x, StateIndex y) const {
        if (!table_.empty()) {
            return table_[x * states_.size() + y];
        }
        const auto& a = states_[x].output;
        const auto& b = states_[y].output;
        double d = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            d = std::max(d, std::fabs(a[i] - b[i]));
        }
        return d;
    }

    /// Explicit table entries (a < b), empty for the infinity-norm metric.
    [[nodiscard]] std::vector<DistanceEntry> table_entries() const {
        std::vector<DistanceEntry> out;
        if (table_.empty()) {
            return out;
        }
        for (StateIndex a = 0; a < size(); ++a) {
            for (StateIndex b = a + 1; b < size(); ++b) {
                out.push_back({a, b, table_[a * size() + b]});
            }
        }
        return out;
    }

    friend bool operator==(const MetricSystem& a, const MetricSystem& b) {
        if (a.inputs_ != b.inputs_ || a.transitions_ != b.transitions_ || a.table_ != b.table_ ||
            a.states_.size() != b.states_.size()) {
            return false;
        }
        for (std::size_t i = 0; i < a.states_.size(); ++i) {
            const auto& s = a.states_[i];
            const auto& t = b.states_[i];
            if (s.label != t.label || s.output != t.output || s.initial != t.initial || s.secret != t.secret) {
                return false;
            }
        }
        return true;
    }

  private:
    static std::string at(const char* key, std::size_t i) { return std::string(key) + "[" + std::to_string(i) + "]"; }

    void validate_states() {
        if (states_.empty()) {
            throw ModelError("states", "system has no states");
        }
        const std::size_t m = states_.front().output.size();
        if (m == 0) {
            throw ModelError("states[0].output", "output dimension must be at least 1");
        }
        initial_ = StateSet(states_.size());
        secret_ = StateSet(states_.size());
        for (std::size_t i = 0; i < states_.size(); ++i) {
            const auto& s = states_[i];
            if (s.output.size() != m) {
                throw ModelError(at("states", i) + ".output", "dimension mismatch: expected " + std::to_string(m) +
                                                                  ", got " + std::to_string(s.output.size()));
            }
            for (const double v : s.output) {
                if (!std::isfinite(v)) {
                    throw ModelError(at("states", i) + ".output", "non-finite output value");
                }
            }
            if (!state_index_.emplace(s.label, i).second) {
                throw ModelError(at("states", i) + ".label", "duplicate state label \"" + s.label + "\"");
            }
            if (s.initial) {
                initial_.insert(i);
            }
            if (s.secret) {
                secret_.insert(i);
            }
        }
        if (initial_.empty()) {
            throw ModelError("states", "at least one initial state is required");
        }
    }

    void validate_inputs() {
        for (std::size_t i = 0; i < inputs_.size(); ++i) {
            if (!input_index_.emplace(inputs_[i], i).second) {
                throw ModelError(at("inputs", i), "duplicate input label \"" + inputs_[i] + "\"");
            }
        }
    }

    void validate_transitions() {
        for (std::size_t i = 0; i < transitions_.size(); ++i) {
            const auto& t = transitions_[i];
            if (t.source >= states_.size() || t.target >= states_.size() || t.input >= inputs_.size()) {
                throw ModelError(at("transitions", i), "index out of range");
            }
        }
        std::vector<std::pair<Transition, std::size_t>> sorted;
        sorted.reserve(transitions_.size());
        for (std::size_t i = 0; i < transitions_.size(); ++i) {
            sorted.emplace_back(transitions_[i], i);
        }
        std::stable_sort(sorted.begin(), sorted.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
        for (std::size_t i = 1; i < sorted.size(); ++i) {
            if (sorted[i].first == sorted[i - 1].first) {
                throw ModelError(at("transitions", sorted[i].second), "duplicate transition");
            }
        }
        transitions_.clear();
        for (const auto& [t, idx] : sorted) {
            transitions_.push_back(t);
        }
    }

    void build_adjacency() {
        const std::size_t n = states_.size();
        const std::size_t u = inputs_.size();
        post_.assign(n * u, {});
        pre_.assign(n * u, {});
        post_any_.assign(n, StateSet(n));
        pre_any_.assign(n, StateSet(n));
        for (const auto& t : transitions_) {
            post_[t.source * u + t.input].push_back(t.target);
            pre_[t.target * u + t.input].push_back(t.source);
            post_any_[t.source].insert(t.target);
            pre_any_[t.target].insert(t.source);
        }
        for (auto& v : pre_) {
            std::sort(v.begin(), v.end());
        }
    }

    void build_table(const std::vector<DistanceEntry>& entries) {
        const std::size_t n = states_.size();
        std::vector<double> table(n * n, -1.0);
        for (std::size_t x = 0; x < n; ++x) {
            table[x * n + x] = 0.0;
        }
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const auto& e = entries[i];
            const auto loc = "metric.entries[" + std::to_string(i) + "]";
            if (e.a >= n || e.b >= n) {
                throw ModelError(loc, "index out of range");
            }
            if (!std::isfinite(e.distance) || e.distance < 0.0) {
                throw ModelError(loc, "distance must be finite and nonnegative");
            }
            if (e.a == e.b) {
                if (e.distance != 0.0) {
                    throw ModelError(loc, "distance table must be zero on the diagonal");
                }
                continue;
            }
            for (const auto& [p, q] : {std::pair{e.a, e.b}, std::pair{e.b, e.a}}) {
                auto& slot = table[p * n + q];
                if (slot >= 0.0 && slot != e.distance) {
                    throw ModelError(loc, "asymmetric distance table: d(" + states_[e.a].label + "," + states_[e.b].label +
                                              ") given inconsistent values");
                }
                slot = e.distance;
            }
        }
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = 0; b < n; ++b) {
                if (table[a * n + b] < 0.0) {
                    throw ModelError("metric.entries", "incomplete distance table: missing pair (" + states_[a].label +
                                                           "," + states_[b].label + ")");
                }
            }
        }
        table_ = std::move(table);
    }

    std::vector<StateRecord> states_;
    std::vector<std::string> inputs_;
    std::vector<Transition> transitions_;
    std::vector<double> table_;
    std::unordered_map<std::string, StateIndex> state_index_;
    std::unordered_map<std::string, InputIndex> input_index_;
    StateSet initial_;
    StateSet secret_;
    std::vector<std::vector<StateIndex>> post_;
    std::vector<std::vector<StateIndex>> pre_;
    std::vector<StateSet> post_any_;
    std::vector<StateSet> pre_any_;
};

[[nodiscard]] inline double distance(const MetricSystem& s, StateIndex x, StateIndex y) { return s.distance(x, y); }

/// Post_u(q) = union of u-successors of the members of q.
[[nodiscard]] inline StateSet post_set(const MetricSystem& s, const StateSet& q, InputIndex u) {
    StateSet out(s.size());
    q.for_each([&](StateIndex x) {
        for (const auto y : s.post(x, u)) {
            out.insert(y);
        }
    });
    return out;
}

/// Pre_u(q) = union of u-predecessors of the members of q.
[[nodiscard]] inline StateSet pre_set(const MetricSystem& s, const StateSet& q, InputIndex u) {
    StateSet out(s.size());
    q.for_each([&](StateIndex x) {
        for (const auto y : s.pre(x, u)) {
            out.insert(y);
        }
    });
    return out;
}

/// Union over all inputs of Post_u(q).
[[nodiscard]] inline StateSet post_set_any(const MetricSystem& s, const StateSet& q) {
    StateSet out(s.size());
    q.for_each([&](StateIndex x) { out |= s.post_any(x); });
    return out;
}

/// Union over all inputs of Pre_u(q).
[[nodiscard]] inline StateSet pre_set_any(const MetricSystem& s, const StateSet& q) {
    StateSet out(s.size());
    q.for_each([&](StateIndex x) { out |= s.pre_any(x); });
    return out;
}

/// { x' in X : d(H(x), H(x')) <= delta + slack }. Always contains x.
[[nodiscard]] inline StateSet close_set(const MetricSystem& s, StateIndex x, double delta, double slack = 0.0) {
    const double bound = threshold(delta, slack);
    StateSet out(s.size());
    for (StateIndex y = 0; y < s.size(); ++y) {
        if (s.distance(x, y) <= bound) {
            out.insert(y);
        }
    }
    out.insert(x);
    return out;
}

/// Precomputed close_set for every state at one delta.
[[nodiscard]] inline std::vector<StateSet> close_sets(const MetricSystem& s, double delta, double slack = 0.0) {
    std::vector<StateSet> out;
    out.reserve(s.size());
    for (StateIndex x = 0; x < s.size(); ++x) {
        out.push_back(close_set(s, x, delta, slack));
    }
    return out;
}

struct NontrivialityResult {
    bool passed = true;
    /// An initial state whose delta-close initial states are all secret.
    std::optional<StateIndex> offending_state;
};

/// Standing assumption: every initial state has a delta-close initial state that is not secret.
[[nodiscard]] inline NontrivialityResult check_nontriviality(const MetricSystem& s, double delta, double slack = 0.0) {
    if (delta < 0.0) {
        throw PreconditionError("delta must be nonnegative");
    }
    NontrivialityResult result;
    s.initial_states().for_each([&](StateIndex x0) {
        if (!result.passed) {
            return;
        }
        const auto close_initial = close_set(s, x0, delta, slack) & s.initial_states();
        if (close_initial.is_subset_of(s.secret_states())) {
            result.passed = false;
            result.offending_state = x0;
        }
    });
    return result;
}

/// True iff consecutive states of `run` are linked by the stated inputs.
[[nodiscard]] inline bool is_valid_run(const MetricSystem& s, const Run& run) {
    if (run.states.empty() || run.inputs.size() + 1 != run.states.size()) {
        return false;
    }
    for (const auto x : run.states) {
        if (x >= s.size()) {
            return false;
        }
    }
    for (std::size_t i = 0; i < run.inputs.size(); ++i) {
        if (run.inputs[i] >= s.input_count()) {
            return false;
        }
        const auto succ = s.post(run.states[i], run.inputs[i]);
        if (!std::binary_search(succ.begin(), succ.end(), run.states[i + 1])) {
            return false;
        }
    }
    return true;
}

/// Sorted distinct pairwise output distances plus 0: the only values at which a verdict can change.
[[nodiscard]] inline std::vector<double> candidate_deltas(const MetricSystem& s) {
    std::vector<double> out{0.0};
    for (StateIndex a = 0; a < s.size(); ++a) {
        for (StateIndex b = a + 1; b < s.size(); ++b) {
            out.push_back(s.distance(a, b));
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace opacity
