// Copyright (c) approx-opacity contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "opacity/abstraction.hpp"
#include "opacity/config.hpp"
#include "opacity/estimator.hpp"
#include "opacity/model_io.hpp"
#include "opacity/oracle.hpp"
#include "opacity/simulation.hpp"
#include "opacity/verify.hpp"

namespace opacity::cli {

inline constexpr const char* kToolName = "approx-opacity";
inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes.
inline constexpr int kHolds = 0;
inline constexpr int kFails = 1;
inline constexpr int kError = 2;

namespace detail {

/// Thrown for invalid flag combinations detected after parsing.
class UsageError : public Error {
  public:
    using Error::Error;
};

inline std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string utc_now() {
    const auto t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Shared flags and the per-invocation output sink.
struct Context {
    std::vector<std::string> argv;
    std::string subcommand;
    double slack = 0.0;
    std::size_t node_cap = BuildOptions{}.node_cap;
    bool strict_def5 = false;
    std::string out_path;
    std::vector<std::string> inputs;

    [[nodiscard]] BuildOptions build_options() const { return BuildOptions{slack, node_cap, strict_def5}; }

    void validate() const {
        if (!(slack >= 0.0)) {
            throw UsageError("slack must be nonnegative");
        }
        if (node_cap == 0) {
            throw UsageError("node cap must be positive");
        }
    }

    // The payload goes to --out when given (plus a provenance sidecar), else to stdout.
    void emit(const std::string& payload, std::ostream& out) const {
        if (out_path.empty()) {
            out << payload;
            return;
        }
        write_file(out_path, payload);
        Json prov{{"tool", kToolName}, {"version", kToolVersion}, {"subcommand", subcommand}};
        prov["arguments"] = argv;
        Json in = Json::array();
        for (const auto& p : inputs) {
            const auto bytes = opacity::detail::read_file(p);
            in.push_back(Json{{"path", p}, {"bytes", bytes.size()}, {"fnv1a64", hex64(fnv1a(bytes))}});
        }
        prov["inputs"] = std::move(in);
        prov["output"] = Json{{"path", out_path}, {"fnv1a64", hex64(fnv1a(payload))}};
        prov["generated_at"] = utc_now();
        write_file(out_path + ".provenance.json", prov.dump(2) + "\n");
    }

    static void write_file(const std::string& path, const std::string& text) {
        std::ofstream f(path, std::ios::binary);
        if (!f || !(f << text) || !f.flush()) {
            throw Error("cannot write " + path);
        }
    }
};

inline void require_nonnegative_delta(double delta) {
    if (!(delta >= 0.0)) {
        throw UsageError("delta must be nonnegative");
    }
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// Quantization from flags overriding the config file.
struct QuantizationFlags {
    std::optional<double> eta;
    std::optional<double> mu;
    std::optional<double> epsilon;
};

inline void add_quantization_flags(CLI::App* sub, QuantizationFlags& q) {
    sub->add_option("--eta", q.eta, "state grid pitch (overrides the config)");
    sub->add_option("--mu", q.mu, "input grid pitch (overrides the config)");
}

inline Quantization resolve_quantization(const AbstractionConfig& cfg, const QuantizationFlags& flags,
                                         std::optional<double> epsilon) {
    const auto eta = flags.eta ? flags.eta : cfg.eta;
    const auto mu = flags.mu ? flags.mu : cfg.mu;
    if (!epsilon) {
        throw UsageError("epsilon is required (flag --epsilon or [quantization] epsilon)");
    }
    if (eta && mu) {
        return Quantization{*eta, *mu, *epsilon};
    }
    if (eta || mu) {
        throw UsageError("eta and mu must be given together");
    }
    if (!cfg.certificate) {
        throw UsageError("no eta/mu given and no certificate to suggest them from");
    }
    const auto s = suggest_quantization(cfg.system, *cfg.certificate, *epsilon);
    if (!s.quantization) {
        throw PreconditionError("cannot suggest a quantization: " + s.reason);
    }
    return *s.quantization;
}

inline std::string summary(const MetricSystem& s, const OpacityVerdict& v) {
    std::string line = std::string(to_string(v.property)) + " opacity " + (v.holds ? "holds" : "fails") +
                       " at delta " + format_real(v.delta);
    if (v.witness) {
        line += "; witness " + run_to_string(s, v.witness->run);
    }
    return line + "\n";
}

inline std::size_t sufficient_oracle_depth(const OpacityVerdict& v) {
    return v.stats.initial_estimator_nodes + v.stats.current_estimator_nodes;
}

} // namespace detail

/// Runs one invocation. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    using namespace detail;
    CLI::App app{"Approximate opacity verification for finite metric systems and control-system abstractions",
                 kToolName};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    Context ctx;
    ctx.argv = args;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--slack", ctx.slack, "additive tolerance on distance comparisons");
        sub->add_option("--node-cap", ctx.node_cap, "estimator node budget");
        sub->add_option("--out", ctx.out_path, "write the result here and a provenance sidecar next to it");
    };

    std::string property_text;
    std::string model_path;
    double delta = 0.0;
    std::function<int()> action;

    // verify
    bool cross_check = false;
    auto* verify_cmd = app.add_subcommand("verify", "decide approximate opacity of a finite metric system");
    add_common(verify_cmd);
    verify_cmd->add_option("--property", property_text, "initial | current | infinite")->required();
    verify_cmd->add_option("--delta", delta, "observation precision")->required();
    verify_cmd->add_flag("--strict-def5", ctx.strict_def5, "current-state estimator successor rule from the reference state only");
    verify_cmd->add_flag("--oracle", cross_check, "also run the brute-force oracle and fail on disagreement");
    verify_cmd->add_option("model", model_path, "model JSON")->required();
    verify_cmd->callback([&] {
        action = [&] {
            const auto p = parse_property(property_text);
            require_nonnegative_delta(delta);
            ctx.inputs = {model_path};
            const auto s = load_system_file(model_path);
            const auto v = verify(s, p, delta, ctx.build_options());
            Json doc = to_json(s, v);
            if (cross_check) {
                const auto o = oracle_opacity(s, delta, p, sufficient_oracle_depth(v), OracleOptions{ctx.slack});
                doc["oracle"] = to_json(s, o);
                if (o.holds_up_to_depth != v.holds) {
                    ctx.emit(dump(doc), out);
                    err << "oracle disagrees with the estimator verdict\n";
                    return kError;
                }
            }
            ctx.emit(dump(doc), out);
            err << summary(s, v);
            return v.holds ? kHolds : kFails;
        };
    });

    // estimator
    std::string kind_text;
    std::string dot_path;
    auto* est_cmd = app.add_subcommand("estimator", "build the reachable initial-state or current-state estimator");
    add_common(est_cmd);
    est_cmd->add_option("--kind", kind_text, "init | cur")->required();
    est_cmd->add_option("--delta", delta, "observation precision")->required();
    est_cmd->add_flag("--strict-def5", ctx.strict_def5, "current-state successor rule from the reference state only");
    est_cmd->add_option("--dot", dot_path, "also write a Graphviz rendering here");
    est_cmd->add_option("model", model_path, "model JSON")->required();
    est_cmd->callback([&] {
        action = [&] {
            EstimatorKind kind;
            if (kind_text == "init" || kind_text == "initial") {
                kind = EstimatorKind::Initial;
            } else if (kind_text == "cur" || kind_text == "current") {
                kind = EstimatorKind::Current;
            } else {
                throw UsageError("unknown estimator kind \"" + kind_text + "\" (expected init or cur)");
            }
            require_nonnegative_delta(delta);
            ctx.inputs = {model_path};
            const auto s = load_system_file(model_path);
            const auto e = build_estimator(s, kind, delta, ctx.build_options());
            ctx.emit(dump(to_json(e)), out);
            if (!dot_path.empty()) {
                Context::write_file(dot_path, to_dot(e));
            }
            return kHolds;
        };
    });

    // relate
    std::string epsilon_text;
    double epsilon = 0.0;
    std::string model_b_path;
    std::string relation_path;
    auto* rel_cmd = app.add_subcommand("relate", "check a given simulation relation or compute the maximal one");
    add_common(rel_cmd);
    rel_cmd->add_option("--kind", kind_text, "InitSOP | CurSOP | InfSOP")->required();
    rel_cmd->add_option("--epsilon", epsilon, "relation precision")->required();
    rel_cmd->add_option("--relation", relation_path, "relation JSON to check instead of computing one");
    rel_cmd->add_option("a", model_path, "simulated system")->required();
    rel_cmd->add_option("b", model_b_path, "simulating system")->required();
    rel_cmd->callback([&] {
        action = [&] {
            const auto kind = parse_relation_kind(kind_text);
            if (!(epsilon >= 0.0)) {
                throw UsageError("epsilon must be nonnegative");
            }
            ctx.inputs = {model_path, model_b_path};
            const auto sa = load_system_file(model_path);
            const auto sb = load_system_file(model_b_path);
            if (!relation_path.empty()) {
                ctx.inputs.push_back(relation_path);
                const auto rel =
                    load_relation(opacity::detail::parse_document(opacity::detail::read_file(relation_path)), sa, sb);
                if (rel.kind != kind || rel.epsilon != epsilon) {
                    throw UsageError("relation file declares " + std::string(to_string(rel.kind)) + " at epsilon " +
                                     format_real(rel.epsilon) + ", flags ask for " + to_string(kind) +
                                     " at epsilon " + format_real(epsilon));
                }
                const auto check = check_relation(sa, sb, rel.pairs, epsilon, kind, ctx.slack);
                ctx.emit(dump(to_json(check, sa, sb)), out);
                for (const auto& v : check.violations) {
                    err << v.clause << ": " << v.message << "\n";
                }
                return check.valid() ? kHolds : kFails;
            }
            const auto m = compute_maximal_relation(sa, sb, epsilon, kind, ctx.slack);
            Json doc{{"relation", to_json(m.relation, sa, sb)},
                     {"initial_condition_holds", m.initial_condition_holds},
                     {"covers_target_initial_states", m.covers_target_initial_states},
                     {"iterations", m.iterations}};
            ctx.emit(dump(doc), out);
            return m.initial_condition_holds ? kHolds : kFails;
        };
    });

    // threshold
    auto* thr_cmd = app.add_subcommand("threshold", "least delta at which a property holds");
    add_common(thr_cmd);
    thr_cmd->add_option("--property", property_text, "initial | current | infinite")->required();
    thr_cmd->add_flag("--strict-def5", ctx.strict_def5, "current-state successor rule from the reference state only");
    thr_cmd->add_option("model", model_path, "model JSON")->required();
    thr_cmd->callback([&] {
        action = [&] {
            const auto p = parse_property(property_text);
            ctx.inputs = {model_path};
            const auto s = load_system_file(model_path);
            const auto t = opacity_threshold(s, p, ctx.build_options());
            ctx.emit((t ? format_real(*t) : std::string("none")) + "\n", out);
            return t ? kHolds : kFails;
        };
    });

    // abstract
    std::string config_path;
    QuantizationFlags qflags;
    auto* abs_cmd = app.add_subcommand("abstract", "build the finite symbolic model of a control system");
    add_common(abs_cmd);
    abs_cmd->add_option("--config", config_path, "control-system TOML")->required();
    add_quantization_flags(abs_cmd, qflags);
    abs_cmd->add_option("--epsilon", qflags.epsilon, "precision (overrides the config)");
    abs_cmd->callback([&] {
        action = [&] {
            ctx.inputs = {config_path};
            const auto cfg = load_abstraction_config_file(config_path);
            const auto q = resolve_quantization(cfg, qflags, qflags.epsilon ? qflags.epsilon : cfg.epsilon);
            const auto model = build_symbolic_model(cfg.system, q);
            ctx.emit(dump_system(model.system), out);
            err << model.system.size() << " states, " << model.system.inputs().size() << " inputs, "
                << model.boundary_escapes << " boundary escapes (eta " << format_real(q.eta) << ", mu "
                << format_real(q.mu) << ")\n";
            return kHolds;
        };
    });

    // pipeline
    auto* pipe_cmd = app.add_subcommand("pipeline", "verify a control system through its symbolic model");
    add_common(pipe_cmd);
    pipe_cmd->add_option("--config", config_path, "control-system TOML")->required();
    pipe_cmd->add_option("--delta", delta, "observation precision")->required();
    pipe_cmd->add_option("--epsilon", qflags.epsilon, "abstraction precision (overrides the config)");
    pipe_cmd->add_option("--property", property_text, "initial | current | infinite")->required();
    pipe_cmd->add_flag("--strict-def5", ctx.strict_def5, "current-state successor rule from the reference state only");
    add_quantization_flags(pipe_cmd, qflags);
    pipe_cmd->callback([&] {
        action = [&] {
            const auto p = parse_property(property_text);
            require_nonnegative_delta(delta);
            ctx.inputs = {config_path};
            const auto cfg = load_abstraction_config_file(config_path);
            if (!cfg.certificate) {
                throw UsageError("pipeline needs a [certificate] section");
            }
            const auto eps = qflags.epsilon ? qflags.epsilon : cfg.epsilon;
            if (!eps) {
                throw UsageError("epsilon is required (flag --epsilon or [quantization] epsilon)");
            }
            std::optional<Quantization> q;
            if (qflags.eta || qflags.mu || cfg.eta || cfg.mu) {
                q = resolve_quantization(cfg, qflags, eps);
            }
            const auto r = end_to_end_verify(cfg.system, *cfg.certificate, *eps, delta, p, q, ctx.build_options());
            ctx.emit(dump(to_json(r)), out);
            err << to_string(r.outcome) << ": " << r.explanation << "\n";
            return r.outcome == PipelineOutcome::Holds ? kHolds : kFails;
        };
    });

    // oracle
    std::optional<std::size_t> depth;
    std::size_t budget = OracleOptions{}.budget;
    auto* orc_cmd = app.add_subcommand("oracle", "brute-force opacity check by run enumeration");
    add_common(orc_cmd);
    orc_cmd->add_option("--property", property_text, "initial | current | infinite")->required();
    orc_cmd->add_option("--delta", delta, "observation precision")->required();
    orc_cmd->add_option("--depth", depth, "run length bound (default: estimator node count)");
    orc_cmd->add_option("--budget", budget, "maximum run prefixes explored");
    orc_cmd->add_option("model", model_path, "model JSON")->required();
    orc_cmd->callback([&] {
        action = [&] {
            const auto p = parse_property(property_text);
            require_nonnegative_delta(delta);
            ctx.inputs = {model_path};
            const auto s = load_system_file(model_path);
            const auto d = depth ? *depth : sufficient_oracle_depth(verify(s, p, delta, ctx.build_options()));
            const auto o = oracle_opacity(s, delta, p, d, OracleOptions{ctx.slack, budget});
            ctx.emit(dump(to_json(s, o)), out);
            return o.holds_up_to_depth ? kHolds : kFails;
        };
    });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kHolds;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kHolds;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return kHolds;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kError;
    }

    for (const auto* sub : app.get_subcommands()) {
        ctx.subcommand = sub->get_name();
    }
    try {
        ctx.validate();
        return action();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kError;
    }
}

} // namespace opacity::cli
