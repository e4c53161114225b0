// Copyright (c) approx-opacity contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "opacity/error.hpp"
#include "opacity/model_io.hpp"
#include "opacity/state_set.hpp"
#include "opacity/system.hpp"
#include "opacity/verify.hpp"

namespace opacity {

/// Opacity-preserving simulation kinds: initial-state, current-state and infinite-step.
enum class RelationKind { InitSOP, CurSOP, InfSOP };

[[nodiscard]] inline const char* to_string(RelationKind k) noexcept {
    switch (k) {
    case RelationKind::InitSOP:
        return "InitSOP";
    case RelationKind::CurSOP:
        return "CurSOP";
    case RelationKind::InfSOP:
        return "InfSOP";
    }
    return "?";
}

[[nodiscard]] inline RelationKind parse_relation_kind(const std::string& text) {
    if (text == "InitSOP" || text == "init" || text == "initial") {
        return RelationKind::InitSOP;
    }
    if (text == "CurSOP" || text == "cur" || text == "current") {
        return RelationKind::CurSOP;
    }
    if (text == "InfSOP" || text == "inf" || text == "infinite") {
        return RelationKind::InfSOP;
    }
    throw PreconditionError("unknown relation kind \"" + text + "\" (expected InitSOP, CurSOP or InfSOP)");
}

/// The opacity property a relation kind preserves.
[[nodiscard]] inline Property preserved_property(RelationKind k) noexcept {
    switch (k) {
    case RelationKind::InitSOP:
        return Property::Initial;
    case RelationKind::CurSOP:
        return Property::Current;
    case RelationKind::InfSOP:
        return Property::Infinite;
    }
    return Property::Initial;
}

/// An InfSOP relation is both a CurSOP and an InitSOP relation.
[[nodiscard]] inline bool kind_covers(RelationKind k, Property p) noexcept {
    return k == RelationKind::InfSOP || preserved_property(k) == p;
}

struct StatePair {
    StateIndex a = 0;
    StateIndex b = 0;
    friend auto operator<=>(const StatePair&, const StatePair&) = default;
};

struct SimRelation {
    /// Sorted and duplicate-free.
    std::vector<StatePair> pairs;
    RelationKind kind = RelationKind::InitSOP;
    double epsilon = 0.0;
    /// Every clause of the kind's definition holds, including the initial-state clauses.
    bool validated = false;

    [[nodiscard]] bool contains(StatePair p) const { return std::binary_search(pairs.begin(), pairs.end(), p); }
};

struct ClauseViolation {
    /// "(1)(a)", "(2)", "(3)(c)", ...
    std::string clause;
    /// Offending pair for clauses (2)-(3). For clause (1) only the unmatched initial state is set,
    /// in `a` for clauses quantifying over Sa and in `b` for those quantifying over Sb.
    std::optional<StateIndex> a;
    std::optional<StateIndex> b;
    std::string message;
};

struct RelationCheck {
    SimRelation relation;
    /// All violated clauses in clause order, each with its lexicographically smallest witness.
    std::vector<ClauseViolation> violations;

    [[nodiscard]] bool valid() const noexcept { return violations.empty(); }
};

namespace detail {

inline void require_same_output_dim(const MetricSystem& sa, const MetricSystem& sb) {
    if (sa.output_dim() != sb.output_dim()) {
        throw PreconditionError("output dimension mismatch: " + std::to_string(sa.output_dim()) + " vs " +
                                std::to_string(sb.output_dim()));
    }
}

/// Infinity-norm distance between outputs of two systems.
inline double cross_distance(const MetricSystem& sa, StateIndex a, const MetricSystem& sb, StateIndex b) {
    const auto& ya = sa.state(a).output;
    const auto& yb = sb.state(b).output;
    double d = 0.0;
    for (std::size_t i = 0; i < ya.size(); ++i) {
        d = std::max(d, std::fabs(ya[i] - yb[i]));
    }
    return d;
}

inline void require_norm_metric(const MetricSystem& sa, const MetricSystem& sb) {
    if (sa.has_distance_table() || sb.has_distance_table()) {
        throw PreconditionError("relations between systems require the infinity-norm output metric");
    }
}

/// Row/column bitset view of a relation: rows[a] = {b : (a,b) in R}, cols[b] = {a : (a,b) in R}.
struct RelationMatrix {
    std::vector<StateSet> rows;
    std::vector<StateSet> cols;

    RelationMatrix(std::size_t na, std::size_t nb) : rows(na, StateSet(nb)), cols(nb, StateSet(na)) {}

    void insert(StateIndex a, StateIndex b) {
        rows[a].insert(b);
        cols[b].insert(a);
    }
    void erase(StateIndex a, StateIndex b) {
        rows[a].erase(b);
        cols[b].erase(a);
    }
    [[nodiscard]] bool contains(StateIndex a, StateIndex b) const { return rows[a].contains(b); }
};

/// Whether clause-(3) item `index` (0..3 for (a)..(d) of the current-state numbering) fails at (a,b).
/// `witness` receives the smallest unmatched successor.
inline bool step_clause_fails(const MetricSystem& sa, const MetricSystem& sb, const RelationMatrix& r, int index,
                              StateIndex a, StateIndex b, StateIndex* witness) {
    const StateSet& post_a = sa.post_any(a);
    const StateSet& post_b = sb.post_any(b);
    bool failed = false;
    const auto scan = [&](const StateSet& domain, auto&& ok) {
        domain.for_each([&](StateIndex x) {
            if (!failed && !ok(x)) {
                failed = true;
                if (witness != nullptr) {
                    *witness = x;
                }
            }
        });
    };
    switch (index) {
    case 0: // every Sa step is matched by some Sb step
        scan(post_a, [&](StateIndex a2) { return r.rows[a2].intersects(post_b); });
        break;
    case 1: { // every Sa step into a secret state is matched by an Sb step into a secret state
        const StateSet secret_b = post_b & sb.secret_states();
        scan(post_a & sa.secret_states(), [&](StateIndex a2) { return r.rows[a2].intersects(secret_b); });
        break;
    }
    case 2: // every Sb step is matched by some Sa step
        scan(post_b, [&](StateIndex b2) { return r.cols[b2].intersects(post_a); });
        break;
    case 3: { // every Sb step into a non-secret state is matched by an Sa step into a non-secret state
        const StateSet open_a = post_a - sa.secret_states();
        scan(post_b - sb.secret_states(), [&](StateIndex b2) { return r.cols[b2].intersects(open_a); });
        break;
    }
    default:
        break;
    }
    return failed;
}

/// Clause-(3) items of a kind, in the current-state numbering. InitSOP uses (a) and (c), which it
/// numbers (3)(a) and (3)(b).
inline std::vector<int> step_clauses(RelationKind kind) {
    if (kind == RelationKind::InitSOP) {
        return {0, 2};
    }
    return {0, 1, 2, 3};
}

inline bool any_step_clause_fails(const MetricSystem& sa, const MetricSystem& sb, const RelationMatrix& r,
                                  RelationKind kind, StateIndex a, StateIndex b) {
    for (const int index : step_clauses(kind)) {
        if (step_clause_fails(sa, sb, r, index, a, b, nullptr)) {
            return true;
        }
    }
    return false;
}

inline std::string step_clause_name(RelationKind kind, int index) {
    if (kind == RelationKind::InitSOP) {
        return index == 0 ? "(3)(a)" : "(3)(b)";
    }
    static const char* names[] = {"(3)(a)", "(3)(b)", "(3)(c)", "(3)(d)"};
    return names[index];
}

struct InitialClauseResult {
    std::string clause;
    bool over_a = true;
    std::optional<StateIndex> unmatched;
};

/// Evaluate the kind's clause (1) items in order.
inline std::vector<InitialClauseResult> initial_clauses(const MetricSystem& sa, const MetricSystem& sb,
                                                        const RelationMatrix& r, RelationKind kind) {
    const StateSet a0 = sa.initial_states();
    const StateSet b0 = sb.initial_states();
    const auto forall_a = [&](const StateSet& dom, const StateSet& targets) -> std::optional<StateIndex> {
        std::optional<StateIndex> bad;
        dom.for_each([&](StateIndex a) {
            if (!bad && !r.rows[a].intersects(targets)) {
                bad = a;
            }
        });
        return bad;
    };
    const auto forall_b = [&](const StateSet& dom, const StateSet& targets) -> std::optional<StateIndex> {
        std::optional<StateIndex> bad;
        dom.for_each([&](StateIndex b) {
            if (!bad && !r.cols[b].intersects(targets)) {
                bad = b;
            }
        });
        return bad;
    };
    const auto secret_init = [&] { return forall_a(a0 & sa.secret_states(), b0 & sb.secret_states()); };
    const auto open_init = [&] { return forall_b(b0 - sb.secret_states(), a0 - sa.secret_states()); };
    std::vector<InitialClauseResult> out;
    switch (kind) {
    case RelationKind::InitSOP:
        out.push_back({"(1)(a)", true, secret_init()});
        out.push_back({"(1)(b)", false, open_init()});
        break;
    case RelationKind::CurSOP:
        out.push_back({"(1)", true, forall_a(a0, b0)});
        break;
    case RelationKind::InfSOP:
        out.push_back({"(1)(a)", true, forall_a(a0, b0)});
        out.push_back({"(1)(b)", true, secret_init()});
        out.push_back({"(1)(c)", false, open_init()});
        break;
    }
    return out;
}

inline SimRelation relation_from_matrix(const RelationMatrix& r, RelationKind kind, double epsilon) {
    SimRelation rel;
    rel.kind = kind;
    rel.epsilon = epsilon;
    for (StateIndex a = 0; a < r.rows.size(); ++a) {
        r.rows[a].for_each([&](StateIndex b) { rel.pairs.push_back({a, b}); });
    }
    return rel;
}

} // namespace detail

/// Check every clause of the kind's definition for the relation `pairs` from `sa` to `sb`.
[[nodiscard]] inline RelationCheck check_relation(const MetricSystem& sa, const MetricSystem& sb,
                                                  std::vector<StatePair> pairs, double epsilon, RelationKind kind,
                                                  double slack = 0.0) {
    using namespace detail;
    require_same_output_dim(sa, sb);
    require_norm_metric(sa, sb);
    if (!(epsilon >= 0.0)) {
        throw PreconditionError("epsilon must be nonnegative");
    }
    RelationMatrix r(sa.size(), sb.size());
    for (const auto& p : pairs) {
        if (p.a >= sa.size() || p.b >= sb.size()) {
            throw PreconditionError("relation pair index out of range");
        }
        r.insert(p.a, p.b);
    }
    RelationCheck out;
    out.relation = relation_from_matrix(r, kind, epsilon);

    const auto label_a = [&](StateIndex a) { return sa.state(a).label; };
    const auto label_b = [&](StateIndex b) { return sb.state(b).label; };

    for (const auto& c : initial_clauses(sa, sb, r, kind)) {
        if (!c.unmatched) {
            continue;
        }
        ClauseViolation v;
        v.clause = c.clause;
        if (c.over_a) {
            v.a = c.unmatched;
            v.message = "initial state " + label_a(*c.unmatched) + " of Sa has no admissible related initial state in Sb";
        } else {
            v.b = c.unmatched;
            v.message = "initial state " + label_b(*c.unmatched) + " of Sb has no admissible related initial state in Sa";
        }
        out.violations.push_back(std::move(v));
    }

    const double bound = threshold(epsilon, slack);
    for (const auto& p : out.relation.pairs) {
        const double d = cross_distance(sa, p.a, sb, p.b);
        if (d > bound) {
            out.violations.push_back({"(2)", p.a, p.b,
                                      "d(H(" + label_a(p.a) + "),H(" + label_b(p.b) + ")) = " + std::to_string(d) +
                                          " exceeds epsilon"});
            break;
        }
    }

    for (const int index : step_clauses(kind)) {
        for (const auto& p : out.relation.pairs) {
            StateIndex succ = 0;
            if (!step_clause_fails(sa, sb, r, index, p.a, p.b, &succ)) {
                continue;
            }
            const bool from_a = index < 2;
            out.violations.push_back(
                {step_clause_name(kind, index), p.a, p.b,
                 "pair (" + label_a(p.a) + "," + label_b(p.b) + "): step to " +
                     (from_a ? label_a(succ) + " in Sa" : label_b(succ) + " in Sb") + " has no related matching step"});
            break;
        }
    }
    out.relation.validated = out.violations.empty();
    return out;
}

struct MaximalRelation {
    SimRelation relation;
    /// Clause (1) of the kind holds on the maximal relation, i.e. Sa is simulated by Sb.
    bool initial_condition_holds = false;
    /// Every initial state of Sb is related to some initial state of Sa. Not part of any
    /// definition; reported because the current-state and infinite-step transfer arguments use it.
    bool covers_target_initial_states = false;
    std::size_t iterations = 0;
};

/// Greatest relation satisfying clauses (2) and (3) of the kind, computed by round-based refinement
/// from all epsilon-close pairs.
///
/// Every clause-(3) item is monotone in R (enlarging R can only turn failures into successes), so
/// the clause operator has a greatest fixpoint and descending iteration from the epsilon-close pairs
/// reaches it. Each round removes all pairs failing against the current relation, so the result
/// does not depend on pair order. Clause (1) is checked afterwards since it constrains R globally.
[[nodiscard]] inline MaximalRelation compute_maximal_relation(const MetricSystem& sa, const MetricSystem& sb,
                                                              double epsilon, RelationKind kind, double slack = 0.0) {
    using namespace detail;
    require_same_output_dim(sa, sb);
    require_norm_metric(sa, sb);
    if (!(epsilon >= 0.0)) {
        throw PreconditionError("epsilon must be nonnegative");
    }
    const double bound = threshold(epsilon, slack);
    RelationMatrix r(sa.size(), sb.size());
    for (StateIndex a = 0; a < sa.size(); ++a) {
        for (StateIndex b = 0; b < sb.size(); ++b) {
            if (cross_distance(sa, a, sb, b) <= bound) {
                r.insert(a, b);
            }
        }
    }
    MaximalRelation out;
    while (true) {
        std::vector<StatePair> removal;
        for (StateIndex a = 0; a < sa.size(); ++a) {
            r.rows[a].for_each([&](StateIndex b) {
                if (any_step_clause_fails(sa, sb, r, kind, a, b)) {
                    removal.push_back({a, b});
                }
            });
        }
        if (removal.empty()) {
            break;
        }
        ++out.iterations;
        for (const auto& p : removal) {
            r.erase(p.a, p.b);
        }
    }
    out.relation = relation_from_matrix(r, kind, epsilon);
    out.initial_condition_holds = true;
    for (const auto& c : initial_clauses(sa, sb, r, kind)) {
        out.initial_condition_holds = out.initial_condition_holds && !c.unmatched;
    }
    out.relation.validated = out.initial_condition_holds;
    out.covers_target_initial_states = true;
    sb.initial_states().for_each([&](StateIndex b) {
        out.covers_target_initial_states = out.covers_target_initial_states && r.cols[b].intersects(sa.initial_states());
    });
    return out;
}

// ---- transfer -------------------------------------------------------------------------------

enum class TransferDirection { Positive, Negative };

[[nodiscard]] inline const char* to_string(TransferDirection d) noexcept {
    return d == TransferDirection::Positive ? "positive" : "negative";
}

/// A verdict about one system, as premise or conclusion of a transfer.
struct VerdictClaim {
    std::string system;
    Property property = Property::Initial;
    double delta = 0.0;
    bool holds = true;
};

/// A validated relation and the direction it was validated in.
struct RelationCertificate {
    RelationKind kind = RelationKind::InitSOP;
    double epsilon = 0.0;
    /// Name of the simulated system (source of the relation).
    std::string from;
    /// Name of the simulating system (target of the relation).
    std::string to;
    bool validated = false;
};

struct TransferResult {
    TransferDirection direction = TransferDirection::Positive;
    VerdictClaim premise;
    RelationCertificate certificate;
    VerdictClaim conclusion;
};

/// Tolerance for rounding in delta arithmetic, e.g. 0.1 + 2 * 0.1 versus 0.3.
inline constexpr double kTransferRoundoff = 1e-12;

/// Derive a guaranteed verdict for the other system from a premise verdict and a validated relation.
///
/// Positive direction: the relation certifies from ⪯ to, the premise says `to` holds at δp, and the
/// conclusion is that `from` holds at δ = δp + 2ε (or at the requested δ when δp ≤ δ − 2ε).
/// Negative direction: the premise says `from` fails at δp, and the conclusion is that `to` fails at
/// δ = δp − 2ε. Never runs a verification.
[[nodiscard]] inline TransferResult transfer(const VerdictClaim& premise, const RelationCertificate& cert,
                                             std::optional<double> requested_delta = std::nullopt) {
    if (!cert.validated) {
        throw PreconditionError("relation is not validated; refusing to conclude");
    }
    if (!kind_covers(cert.kind, premise.property)) {
        throw PreconditionError(std::string("relation kind ") + to_string(cert.kind) + " does not preserve " +
                                to_string(premise.property) + "-state opacity");
    }
    if (!(premise.delta >= 0.0) || !(cert.epsilon >= 0.0)) {
        throw PreconditionError("delta and epsilon must be nonnegative");
    }
    const double two_eps = 2.0 * cert.epsilon;
    TransferResult out;
    out.premise = premise;
    out.certificate = cert;
    out.conclusion.property = premise.property;
    out.conclusion.holds = premise.holds;

    if (premise.holds) {
        if (premise.system != cert.to) {
            throw PreconditionError("positive transfer needs a premise about the simulating system " + cert.to);
        }
        out.direction = TransferDirection::Positive;
        out.conclusion.system = cert.from;
        const double delta = requested_delta.value_or(premise.delta + two_eps);
        if (cert.epsilon > delta / 2.0 + kTransferRoundoff) {
            throw PreconditionError("precondition ε ≤ δ/2 violated: epsilon " + std::to_string(cert.epsilon) +
                                    ", delta " + std::to_string(delta));
        }
        if (premise.delta > delta - two_eps + kTransferRoundoff) {
            throw PreconditionError("premise holds only at delta " + std::to_string(premise.delta) +
                                    ", which exceeds delta - 2*epsilon");
        }
        out.conclusion.delta = delta;
    } else {
        if (premise.system != cert.from) {
            throw PreconditionError("negative transfer needs a premise about the simulated system " + cert.from);
        }
        out.direction = TransferDirection::Negative;
        out.conclusion.system = cert.to;
        const double delta = requested_delta.value_or(premise.delta - two_eps);
        if (delta < 0.0 && delta > -kTransferRoundoff) {
            out.conclusion.delta = 0.0;
        } else if (delta < 0.0) {
            throw PreconditionError("premise delta is below 2*epsilon; no nonnegative conclusion delta");
        } else {
            out.conclusion.delta = delta;
        }
        if (delta + two_eps > premise.delta + kTransferRoundoff) {
            throw PreconditionError("premise fails only at delta " + std::to_string(premise.delta) +
                                    ", which is below delta + 2*epsilon");
        }
    }
    return out;
}

// ---- serialization --------------------------------------------------------------------------

/// Relation file: {"kind": "...", "epsilon": e, "pairs": [[labelA, labelB], ...]}.
[[nodiscard]] inline SimRelation load_relation(const Json& doc, const MetricSystem& sa, const MetricSystem& sb) {
    using namespace detail;
    if (!doc.is_object()) {
        throw ModelError("", "relation document must be a JSON object");
    }
    reject_unknown_keys(doc, "", {"kind", "epsilon", "pairs"});
    SimRelation rel;
    rel.kind = parse_relation_kind(require_string(require(doc, "kind", ""), "kind"));
    rel.epsilon = require_number(require(doc, "epsilon", ""), "epsilon");
    const auto& pairs = require_array(require(doc, "pairs", ""), "pairs");
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto where = "pairs[" + std::to_string(i) + "]";
        const auto& pj = require_array(pairs[i], where);
        if (pj.size() != 2) {
            throw ModelError(where, "expected [labelA, labelB]");
        }
        const auto& la = require_string(pj[0], where + "[0]");
        const auto& lb = require_string(pj[1], where + "[1]");
        const auto a = sa.find_state(la);
        const auto b = sb.find_state(lb);
        if (!a) {
            throw ModelError(where + "[0]", "unknown label \"" + la + "\"");
        }
        if (!b) {
            throw ModelError(where + "[1]", "unknown label \"" + lb + "\"");
        }
        rel.pairs.push_back({*a, *b});
    }
    std::sort(rel.pairs.begin(), rel.pairs.end());
    rel.pairs.erase(std::unique(rel.pairs.begin(), rel.pairs.end()), rel.pairs.end());
    return rel;
}

[[nodiscard]] inline Json to_json(const SimRelation& rel, const MetricSystem& sa, const MetricSystem& sb) {
    Json pairs = Json::array();
    for (const auto& p : rel.pairs) {
        pairs.push_back(Json::array({sa.state(p.a).label, sb.state(p.b).label}));
    }
    return Json{{"kind", to_string(rel.kind)}, {"epsilon", rel.epsilon}, {"pairs", std::move(pairs)}};
}

[[nodiscard]] inline Json to_json(const RelationCheck& check, const MetricSystem& sa, const MetricSystem& sb) {
    Json violations = Json::array();
    for (const auto& v : check.violations) {
        Json vj{{"clause", v.clause}, {"message", v.message}};
        vj["state_a"] = v.a ? Json(sa.state(*v.a).label) : Json(nullptr);
        vj["state_b"] = v.b ? Json(sb.state(*v.b).label) : Json(nullptr);
        violations.push_back(std::move(vj));
    }
    return Json{{"kind", to_string(check.relation.kind)},
                {"epsilon", check.relation.epsilon},
                {"validated", check.valid()},
                {"pair_count", check.relation.pairs.size()},
                {"violations", std::move(violations)}};
}

[[nodiscard]] inline Json to_json(const VerdictClaim& c) {
    return Json{{"system", c.system}, {"property", to_string(c.property)}, {"delta", c.delta}, {"holds", c.holds}};
}

[[nodiscard]] inline Json to_json(const TransferResult& t) {
    return Json{{"direction", to_string(t.direction)},
                {"premise", to_json(t.premise)},
                {"relation",
                 Json{{"kind", to_string(t.certificate.kind)},
                      {"epsilon", t.certificate.epsilon},
                      {"from", t.certificate.from},
                      {"to", t.certificate.to}}},
                {"conclusion", to_json(t.conclusion)}};
}

} // namespace opacity
