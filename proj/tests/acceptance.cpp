// Copyright (c) approx-opacity contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion. Exit status counts unexpected outcomes: a failed
// criterion that is not listed in kKnownRed, or a listed one that passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "opacity/abstraction.hpp"
#include "opacity/config.hpp"
#include "opacity/estimator.hpp"
#include "opacity/oracle.hpp"
#include "opacity/simulation.hpp"
#include "opacity/verify.hpp"
#include "support/crosscheck.hpp"
#include "support/fixtures.hpp"
#include "support/random_pairs.hpp"
#include "support/random_systems.hpp"

namespace {

using namespace opacity;
using namespace opacity::testing;
using Clock = std::chrono::steady_clock;

// Pinned tolerances and budgets.
constexpr double kRealTol = 1e-12;
constexpr double kGoldenBudgetSeconds = 1.0;
constexpr double kOracleBudgetSeconds = 60.0;
constexpr double kAbstractionBudgetSeconds = 5.0;
constexpr std::size_t kCorpusSize = 200;
constexpr std::size_t kBeliefDepth = 6;
constexpr std::size_t kPairCorpusSize = 200;
constexpr std::size_t kMinTransferInstances = 100;
constexpr std::size_t kRelationSamples = 10'000;

// Criteria that fail against this implementation for a documented reason (see the decisions ledger).
// 5: the current-state and infinite-step transfer claims need every initial state of the simulating
// system to be related to an initial state of the simulated one; the pair corpus contains a relation
// where that fails and the conclusion is false.
const std::set<int> kKnownRed{5};

struct Criterion {
    Criterion(int id_, std::string title_) : id(id_), title(std::move(title_)) {}

    int id;
    std::string title;
    bool pass = true;
    std::vector<std::string> notes;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            notes.push_back("failed: " + what);
        }
    }
    void note(const std::string& text) { notes.push_back(text); }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

bool near(double a, double b) { return std::fabs(a - b) <= kRealTol; }

std::vector<std::string> labels(const MetricSystem& s, const StateSet& q) {
    std::vector<std::string> out;
    q.for_each([&](StateIndex x) { out.push_back(s.state(x).label); });
    return out;
}

void criterion_golden_example(Criterion& c) {
    const auto t0 = Clock::now();
    const auto s = ex1();
    const auto cur005 = verify_current_state(s, 0.05);
    c.require(!cur005.holds, "current-state fails at 0.05");
    c.require(cur005.witness && run_to_string(s, cur005.witness->run) == "B -u-> D -u-> B",
              "witness B -> D -> B at 0.05");
    c.require(verify_current_state(s, 0.1).holds, "current-state holds at 0.1");
    c.require(!verify_initial_state(s, 0.1).holds, "initial-state fails at 0.1");
    c.require(verify_initial_state(s, 0.15).holds, "initial-state holds at 0.15");
    const auto thr = opacity_threshold(s, Property::Initial);
    c.require(thr && near(*thr, 0.15), "initial-state threshold 0.15 within 1e-12");
    const double dt = seconds_since(t0);
    c.require(dt < kGoldenBudgetSeconds, "runtime under 1 s");
    c.note("threshold " + (thr ? fmt(*thr) : std::string("none")) + ", runtime " + fmt(dt) + " s");
}

void criterion_estimator_goldens(Criterion& c) {
    const auto s = ex1();
    const auto e01 = build_initial_estimator(s, 0.1);
    bool found = false;
    for (const auto& edge : e01.edges()) {
        found = found || (node_label(e01, edge.source) == "(D,{D})" && node_label(e01, edge.target) == "(B,{B,C})");
    }
    c.require(found, "S_I at 0.1 has transition (D,{D}) -> (B,{B,C})");

    const auto e015 = build_initial_estimator(s, 0.15);
    const auto b = *s.find_state("B");
    std::vector<std::string> with_b;
    for (NodeId id = 0; id < e015.size(); ++id) {
        if (e015.node(id).reference == b) {
            with_b.push_back(node_label(e015, id));
        }
    }
    c.require(with_b == std::vector<std::string>{"(B,{A,B,C})"}, "S_I at 0.15 has exactly one B node, (B,{A,B,C})");
    c.note("S_I(0.1) " + std::to_string(e01.size()) + " nodes, S_I(0.15) " + std::to_string(e015.size()) + " nodes");
}

void criterion_oracle_equivalence(Criterion& c, const std::vector<MetricSystem>& corpus) {
    const auto t0 = Clock::now();
    CrosscheckReport report;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        crosscheck_verdicts(corpus[i], i, report);
    }
    const double dt = seconds_since(t0);
    c.require(corpus.size() >= 200, "at least 200 systems");
    c.require(report.disagreements == 0, std::to_string(report.disagreements) + " disagreements");
    c.require(dt < kOracleBudgetSeconds, "runtime under 60 s");
    for (const auto& d : report.details) {
        c.note(d);
    }
    c.note(std::to_string(corpus.size()) + " systems, " + std::to_string(report.comparisons) + " verdict comparisons, " +
           std::to_string(report.disagreements) + " disagreements, runtime " + fmt(dt) + " s");
}

void criterion_beliefs(Criterion& c, const std::vector<MetricSystem>& corpus) {
    CrosscheckReport report;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        for (const double d : candidate_deltas(corpus[i])) {
            crosscheck_beliefs(corpus[i], d, kBeliefDepth, i, report);
        }
    }
    c.require(report.disagreements == 0, std::to_string(report.disagreements) + " disagreements");
    for (const auto& d : report.details) {
        c.note(d);
    }
    c.note(std::to_string(report.comparisons) + " estimator paths of length <= 6 compared, " +
           std::to_string(report.disagreements) + " disagreements");
}

void criterion_transfer(Criterion& c) {
    const auto pairs = random_pair_corpus(kPairCorpusSize);
    for (const auto kind : {RelationKind::InitSOP, RelationKind::CurSOP, RelationKind::InfSOP}) {
        const auto p = preserved_property(kind);
        const std::string name = to_string(kind);
        std::size_t instances = 0;
        std::size_t counterexamples = 0;
        std::size_t uncovered_instances = 0;
        std::size_t uncovered_counterexamples = 0;
        std::size_t covered_instances = 0;
        for (std::size_t idx = 0; idx < pairs.size(); ++idx) {
            const auto& pair = pairs[idx];
            const auto m = compute_maximal_relation(pair.a, pair.b, pair.epsilon, kind);
            if (!m.initial_condition_holds) {
                continue;
            }
            for (const double db : candidate_deltas(pair.b)) {
                const double da = db + 2 * pair.epsilon;
                // Standing assumption on the simulated system at the concluded precision.
                if (!check_nontriviality(pair.a, da).passed || !verify(pair.b, p, db).holds) {
                    continue;
                }
                ++instances;
                const auto va = verify(pair.a, p, da);
                const bool ok = va.holds;
                counterexamples += ok ? 0 : 1;
                if (!ok) {
                    c.note(name + " counterexample: pair " + std::to_string(idx) + ", epsilon " + fmt(pair.epsilon) +
                           ", Sb holds at " + fmt(db) + ", Sa fails at " + fmt(da) + " with witness " +
                           run_to_string(pair.a, va.witness->run) +
                           (m.covers_target_initial_states ? "" : ", target initial states not covered"));
                }
                if (!m.covers_target_initial_states) {
                    ++uncovered_instances;
                    uncovered_counterexamples += ok ? 0 : 1;
                } else {
                    ++covered_instances;
                }
            }
        }
        c.require(instances >= kMinTransferInstances, name + ": at least 100 certified instances");
        c.require(counterexamples == 0, name + ": " + std::to_string(counterexamples) + " counterexamples");
        c.note(name + ": " + std::to_string(instances) + " instances, " + std::to_string(counterexamples) +
               " counterexamples; " + std::to_string(uncovered_instances) +
               " instances with an uncovered target initial state, " + std::to_string(uncovered_counterexamples) +
               " of them counterexamples; " + std::to_string(covered_instances) + " covered instances, " +
               std::to_string(counterexamples - uncovered_counterexamples) + " counterexamples");
    }
}

void criterion_abstraction(Criterion& c) {
    const auto t0 = Clock::now();
    const auto cfg = load_abstraction_config_file(sample_path("linear1d.toml"));
    const Quantization q{0.1, 0.05, 0.4};
    const auto& iss = std::get<IssCertificate>(*cfg.certificate);
    const auto check = check_quantization_iss(iss.beta1, iss.gamma, cfg.system.alpha(), q);
    c.require(check.feasible, "quantization feasible");
    c.require(std::fabs(check.margin) <= kRealTol, "margin 0 within 1e-12");
    c.require(near(check.lhs, 0.4), "left side 0.2 + 0.1 + 0.1 = 0.4 within 1e-12");

    const auto model = build_symbolic_model(cfg.system, q);
    const auto& s = model.system;
    c.require(s.size() == 11, "11 states");
    c.require(s.inputs().size() == 3, "3 inputs");
    c.require(labels(s, s.secret_states()) == std::vector<std::string>{"0", "0.1", "0.2"}, "secret set {0, 0.1, 0.2}");
    const auto x = s.find_state("0.4");
    const auto u = s.find_input("0.05");
    bool succ_ok = false;
    if (x && u) {
        std::vector<std::string> succ;
        for (const auto y : s.post(*x, *u)) {
            succ.push_back(s.state(y).label);
        }
        std::sort(succ.begin(), succ.end());
        succ_ok = succ == std::vector<std::string>{"0.2", "0.3"};
    }
    c.require(succ_ok, "successors of (0.4, 0.05) are {0.2, 0.3}");

    const auto report = canonical_relation_check(cfg.system, model, iss, kRelationSamples);
    c.require(report.samples == kRelationSamples, "10000 samples drawn");
    c.require(report.counterexamples == 0, std::to_string(report.counterexamples) + " relation counterexamples");
    const double dt = seconds_since(t0);
    c.require(dt < kAbstractionBudgetSeconds, "runtime under 5 s");
    c.note("margin " + fmt(check.margin) + ", " + std::to_string(s.transitions().size()) + " transitions, " +
           std::to_string(model.boundary_escapes) + " boundary escapes, " + std::to_string(report.counterexamples) +
           " counterexamples in " + std::to_string(report.samples) + " samples, runtime " + fmt(dt) + " s");
}

void criterion_monotonicity(Criterion& c, const std::vector<MetricSystem>& corpus) {
    std::size_t checks = 0;
    std::size_t violations = 0;
    for (const auto& s : corpus) {
        const auto deltas = candidate_deltas(s);
        for (const auto p : {Property::Initial, Property::Current, Property::Infinite}) {
            bool held = false;
            for (const double d : deltas) {
                const bool h = verify(s, p, d).holds;
                ++checks;
                violations += (held && !h) ? 1 : 0;
                held = held || h;
            }
        }
        for (const double d : deltas) {
            const bool inf = verify_infinite_step(s, d).holds;
            ++checks;
            if (inf && !(verify_initial_state(s, d).holds && verify_current_state(s, d).holds)) {
                ++violations;
            }
        }
    }
    c.require(violations == 0, std::to_string(violations) + " violations");
    c.note(std::to_string(checks) + " checks, " + std::to_string(violations) + " violations");
}

void criterion_transfer_arithmetic(Criterion& c) {
    const RelationCertificate cert{RelationKind::InitSOP, 0.1, "Sa", "Sb", true};
    const auto t = transfer({"Sb", Property::Initial, 0.1, true}, cert);
    c.require(t.conclusion.holds && t.conclusion.system == "Sa", "conclusion holds for Sa");
    c.require(near(t.conclusion.delta, 0.3), "conclusion delta 0.3 within 1e-12");
    bool refused = false;
    try {
        (void)transfer({"Sb", Property::Initial, 0.1, true}, cert, 0.15);
    } catch (const PreconditionError&) {
        refused = true;
    }
    c.require(refused, "refuses epsilon 0.1 > delta/2 at delta 0.15");
    c.note("0.1 with epsilon 0.1 gives " + fmt(t.conclusion.delta));
}

void corpus_stats(const std::vector<MetricSystem>& corpus) {
    std::size_t holds[3] = {0, 0, 0};
    std::size_t total = 0;
    for (const auto& s : corpus) {
        for (const double d : candidate_deltas(s)) {
            ++total;
            int i = 0;
            for (const auto p : {Property::Initial, Property::Current, Property::Infinite}) {
                holds[i++] += verify(s, p, d).holds ? 1 : 0;
            }
        }
    }
    std::printf("corpus: %zu systems, %zu (system, delta) points; holds initial %zu, current %zu, infinite %zu\n",
                corpus.size(), total, holds[0], holds[1], holds[2]);
}

} // namespace

int main() {
    const auto corpus = random_corpus(kCorpusSize);
    std::vector<Criterion> criteria{
        {1, "golden example verdicts"},      {2, "estimator goldens"},
        {3, "oracle equivalence"},           {4, "belief characterisation"},
        {5, "transfer along relations"},     {6, "linear abstraction fixture"},
        {7, "monotonicity and implication"}, {8, "transfer arithmetic"},
    };
    const std::vector<std::function<void(Criterion&)>> runs{
        criterion_golden_example,
        criterion_estimator_goldens,
        [&](Criterion& c) { criterion_oracle_equivalence(c, corpus); },
        [&](Criterion& c) { criterion_beliefs(c, corpus); },
        criterion_transfer,
        criterion_abstraction,
        [&](Criterion& c) { criterion_monotonicity(c, corpus); },
        criterion_transfer_arithmetic,
    };
    int failed = 0;
    int unexpected = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        auto& c = criteria[i];
        try {
            runs[i](c);
        } catch (const std::exception& e) {
            c.require(false, std::string("exception: ") + e.what());
        }
        const bool known = kKnownRed.count(c.id) > 0;
        std::printf("%s criterion %d: %s%s\n", c.pass ? "PASS" : "FAIL", c.id, c.title.c_str(),
                    known ? (c.pass ? " (listed as known red; update kKnownRed)" : " (known red, see ledger)") : "");
        for (const auto& n : c.notes) {
            std::printf("    %s\n", n.c_str());
        }
        failed += c.pass ? 0 : 1;
        unexpected += (c.pass == known) ? 1 : 0;
    }
    corpus_stats(corpus);
    std::printf("%d of %zu criteria passed, %d unexpected outcomes\n", static_cast<int>(criteria.size()) - failed,
                criteria.size(), unexpected);
    return unexpected;
}
