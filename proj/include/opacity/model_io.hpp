// Copyright (c) approx-opacity contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "opacity/error.hpp"
#include "opacity/system.hpp"

namespace opacity {

using Json = nlohmann::ordered_json;

namespace detail {

inline std::string json_type_name(const Json& j) { return j.type_name(); }

inline void reject_unknown_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) {
            known = known || it.key() == k;
        }
        if (!known) {
            throw ModelError(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
        }
    }
}

inline const Json& require(const Json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw ModelError(where.empty() ? std::string(key) : where + "." + key, "missing required key");
    }
    return *it;
}

inline double require_number(const Json& j, const std::string& where) {
    if (!j.is_number()) {
        throw ModelError(where, "expected number, got " + json_type_name(j));
    }
    return j.get<double>();
}

inline const std::string& require_string(const Json& j, const std::string& where) {
    if (!j.is_string()) {
        throw ModelError(where, "expected string, got " + json_type_name(j));
    }
    return j.get_ref<const std::string&>();
}

inline const Json& require_array(const Json& j, const std::string& where) {
    if (!j.is_array()) {
        throw ModelError(where, "expected array, got " + json_type_name(j));
    }
    return j;
}

inline Json parse_document(std::string_view document) {
    try {
        return Json::parse(document.begin(), document.end());
    } catch (const Json::parse_error& e) {
        throw ModelError("byte " + std::to_string(e.byte), std::string("malformed JSON: ") + e.what());
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open file: " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace detail

/// Parse and validate a model document. Errors name the offending element, e.g. `transitions[4][2]`.
[[nodiscard]] inline MetricSystem load_system(const Json& doc) {
    using namespace detail;
    if (!doc.is_object()) {
        throw ModelError("", "model document must be a JSON object");
    }
    reject_unknown_keys(doc, "", {"states", "inputs", "transitions", "metric"});

    const auto& states_json = require_array(require(doc, "states", ""), "states");
    std::vector<StateRecord> states;
    std::unordered_map<std::string, StateIndex> state_index;
    for (std::size_t i = 0; i < states_json.size(); ++i) {
        const auto where = "states[" + std::to_string(i) + "]";
        const auto& sj = states_json[i];
        if (!sj.is_object()) {
            throw ModelError(where, "expected object, got " + json_type_name(sj));
        }
        reject_unknown_keys(sj, where, {"label", "output", "initial", "secret"});
        StateRecord rec;
        rec.label = require_string(require(sj, "label", where), where + ".label");
        const auto& out = require_array(require(sj, "output", where), where + ".output");
        for (std::size_t k = 0; k < out.size(); ++k) {
            rec.output.push_back(require_number(out[k], where + ".output[" + std::to_string(k) + "]"));
        }
        for (const auto& [key, flag] : {std::pair{"initial", &rec.initial}, std::pair{"secret", &rec.secret}}) {
            const auto it = sj.find(key);
            if (it == sj.end()) {
                continue;
            }
            if (!it->is_boolean()) {
                throw ModelError(where + "." + key, "expected boolean, got " + json_type_name(*it));
            }
            *flag = it->get<bool>();
        }
        state_index.emplace(rec.label, i);
        states.push_back(std::move(rec));
    }

    const auto& inputs_json = require_array(require(doc, "inputs", ""), "inputs");
    std::vector<std::string> inputs;
    std::unordered_map<std::string, InputIndex> input_index;
    for (std::size_t i = 0; i < inputs_json.size(); ++i) {
        inputs.push_back(require_string(inputs_json[i], "inputs[" + std::to_string(i) + "]"));
        input_index.emplace(inputs.back(), i);
    }

    const auto lookup = [](const auto& index, const std::string& label, const std::string& where) {
        const auto it = index.find(label);
        if (it == index.end()) {
            throw ModelError(where, "unknown label \"" + label + "\"");
        }
        return it->second;
    };

    const auto& trans_json = require_array(require(doc, "transitions", ""), "transitions");
    std::vector<Transition> transitions;
    for (std::size_t i = 0; i < trans_json.size(); ++i) {
        const auto where = "transitions[" + std::to_string(i) + "]";
        const auto& tj = require_array(trans_json[i], where);
        if (tj.size() != 3) {
            throw ModelError(where, "expected [source, input, target]");
        }
        Transition t;
        t.source = lookup(state_index, require_string(tj[0], where + "[0]"), where + "[0]");
        t.input = lookup(input_index, require_string(tj[1], where + "[1]"), where + "[1]");
        t.target = lookup(state_index, require_string(tj[2], where + "[2]"), where + "[2]");
        transitions.push_back(t);
    }

    std::optional<std::vector<DistanceEntry>> table;
    if (const auto it = doc.find("metric"); it != doc.end()) {
        const auto& mj = *it;
        if (!mj.is_object()) {
            throw ModelError("metric", "expected object, got " + json_type_name(mj));
        }
        reject_unknown_keys(mj, "metric", {"type", "entries"});
        const auto& type = require_string(require(mj, "type", "metric"), "metric.type");
        if (type == "infinity") {
            if (mj.contains("entries")) {
                throw ModelError("metric.entries", "entries are only allowed for type \"table\"");
            }
        } else if (type == "table") {
            const auto& entries = require_array(require(mj, "entries", "metric"), "metric.entries");
            table.emplace();
            for (std::size_t i = 0; i < entries.size(); ++i) {
                const auto where = "metric.entries[" + std::to_string(i) + "]";
                const auto& ej = require_array(entries[i], where);
                if (ej.size() != 3) {
                    throw ModelError(where, "expected [labelA, labelB, distance]");
                }
                DistanceEntry e;
                e.a = lookup(state_index, require_string(ej[0], where + "[0]"), where + "[0]");
                e.b = lookup(state_index, require_string(ej[1], where + "[1]"), where + "[1]");
                e.distance = require_number(ej[2], where + "[2]");
                table->push_back(e);
            }
        } else {
            throw ModelError("metric.type", "unknown metric type \"" + type + "\"");
        }
    }

    return MetricSystem(std::move(states), std::move(inputs), std::move(transitions), std::move(table));
}

[[nodiscard]] inline MetricSystem load_system(std::string_view document) {
    return load_system(detail::parse_document(document));
}

[[nodiscard]] inline MetricSystem load_system_file(const std::string& path) {
    return load_system(std::string_view(detail::read_file(path)));
}

[[nodiscard]] inline Json to_json(const MetricSystem& s) {
    Json doc;
    Json states = Json::array();
    for (const auto& st : s.states()) {
        Json sj;
        sj["label"] = st.label;
        sj["output"] = st.output;
        sj["initial"] = st.initial;
        sj["secret"] = st.secret;
        states.push_back(std::move(sj));
    }
    doc["states"] = std::move(states);
    doc["inputs"] = s.inputs();
    Json transitions = Json::array();
    for (const auto& t : s.transitions()) {
        transitions.push_back(Json::array({s.state(t.source).label, s.inputs()[t.input], s.state(t.target).label}));
    }
    doc["transitions"] = std::move(transitions);
    if (s.has_distance_table()) {
        Json entries = Json::array();
        for (const auto& e : s.table_entries()) {
            entries.push_back(Json::array({s.state(e.a).label, s.state(e.b).label, e.distance}));
        }
        doc["metric"] = Json{{"type", "table"}, {"entries", std::move(entries)}};
    }
    return doc;
}

/// Canonical serialization: two-space indent, transitions sorted, trailing newline.
[[nodiscard]] inline std::string dump_system(const MetricSystem& s) { return to_json(s).dump(2) + "\n"; }

/// Label list of a state set, ascending by index.
[[nodiscard]] inline Json labels_json(const MetricSystem& s, const StateSet& q) {
    Json out = Json::array();
    q.for_each([&](StateIndex x) { out.push_back(s.state(x).label); });
    return out;
}

/// {states, inputs, outputs} rendering of a run.
[[nodiscard]] inline Json run_json(const MetricSystem& s, const Run& run) {
    Json states = Json::array();
    Json outputs = Json::array();
    for (const auto x : run.states) {
        states.push_back(s.state(x).label);
        outputs.push_back(s.state(x).output);
    }
    Json inputs = Json::array();
    for (const auto u : run.inputs) {
        inputs.push_back(s.inputs()[u]);
    }
    return Json{{"states", std::move(states)}, {"inputs", std::move(inputs)}, {"outputs", std::move(outputs)}};
}

/// "B -u-> D -u-> B"
[[nodiscard]] inline std::string run_to_string(const MetricSystem& s, const Run& run) {
    std::string out;
    for (std::size_t i = 0; i < run.states.size(); ++i) {
        if (i > 0) {
            out += " -" + s.inputs()[run.inputs[i - 1]] + "-> ";
        }
        out += s.state(run.states[i]).label;
    }
    return out;
}

} // namespace opacity
