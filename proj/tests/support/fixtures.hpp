// Copyright (c) approx-opacity contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "opacity/model_io.hpp"
#include "opacity/system.hpp"

namespace opacity::testing {

inline std::string sample_path(const std::string& name) { return std::string(OPACITY_SAMPLES_DIR) + "/" + name; }

/// Four-state system used by the golden suites: outputs A=0.2, B=0.1, C=0.15, D=0.35,
/// X0={A,B}, XS={B}, one input u, transitions A->A, B->D, C->D, D->A, D->B.
inline MetricSystem ex1() {
    std::vector<StateRecord> states{
        {"A", {0.2}, true, false},
        {"B", {0.1}, true, true},
        {"C", {0.15}, false, false},
        {"D", {0.35}, false, false},
    };
    std::vector<Transition> transitions{{0, 0, 0}, {1, 0, 3}, {2, 0, 3}, {3, 0, 0}, {3, 0, 1}};
    return MetricSystem(std::move(states), {"u"}, std::move(transitions));
}

enum Ex1State : StateIndex { A = 0, B = 1, C = 2, D = 3 };

inline StateSet set_of(const MetricSystem& s, std::initializer_list<StateIndex> members) {
    return StateSet(s.size(), members);
}

/// Copy of `s` with different secret flags.
inline MetricSystem with_secrets(const MetricSystem& s, const std::vector<bool>& secret) {
    auto states = s.states();
    for (std::size_t i = 0; i < states.size(); ++i) {
        states[i].secret = secret[i];
    }
    return MetricSystem(std::move(states), s.inputs(), s.transitions());
}

} // namespace opacity::testing
