// Copyright (c) approx-opacity contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <toml.hpp>

#include "opacity/abstraction.hpp"
#include "opacity/error.hpp"

namespace opacity {

/// A control system with an optional certificate and quantization, as read from a TOML file:
///
///   [dynamics]      A = [[...]], B = [[...]], c = [...]
///   [output]        C = [[...]], d = [...], alpha = { type = "linear", gain = 1.0 }   (optional)
///   [domains]       state, secret, complement, input: lists of boxes; a box is [lo, hi] in 1-d
///                   or [[lo1, hi1], [lo2, hi2], ...]
///   [certificate]   type = "iss" with beta1, gamma; or derive = "linear";
///                   type = "lyapunov" with alpha1, alpha2, kappa, lambda, gamma_hat (rho, sigma optional)
///   [quantization]  eta, mu, epsilon (each optional)
///
/// K-functions are inline tables { type = "linear", gain }, { type = "power", gain, exponent } or
/// { type = "table", points = [[r, value], ...] }.
struct AbstractionConfig {
    ControlSystem system;
    std::optional<Certificate> certificate;
    /// The certificate came from linear_certificate.
    bool derived_certificate = false;
    std::optional<double> eta;
    std::optional<double> mu;
    std::optional<double> epsilon;

    /// The configured quantization when all of eta, mu and epsilon are present.
    [[nodiscard]] std::optional<Quantization> quantization() const {
        if (eta && mu && epsilon) {
            return Quantization{*eta, *mu, *epsilon};
        }
        return std::nullopt;
    }
};

namespace detail::toml_io {

inline void reject_unknown(const toml::table& t, const std::string& where, std::set<std::string> allowed) {
    for (const auto& [key, value] : t) {
        if (!allowed.count(std::string(key.str()))) {
            throw ModelError(where.empty() ? std::string(key.str()) : where + "." + std::string(key.str()),
                             "unknown key");
        }
    }
}

inline const toml::table& table_at(const toml::table& t, const std::string& key, const std::string& where) {
    const auto* sub = t[key].as_table();
    if (sub == nullptr) {
        throw ModelError(where.empty() ? key : where + "." + key, "missing or not a table");
    }
    return *sub;
}

inline double number(const toml::node& n, const std::string& where) {
    if (const auto* i = n.as_integer()) {
        return static_cast<double>(i->get());
    }
    if (const auto* f = n.as_floating_point()) {
        return f->get();
    }
    throw ModelError(where, "expected a number");
}

inline const toml::array& array(const toml::node& n, const std::string& where) {
    const auto* a = n.as_array();
    if (a == nullptr) {
        throw ModelError(where, "expected an array");
    }
    return *a;
}

inline Eigen::VectorXd vector(const toml::node& n, const std::string& where) {
    const auto& a = array(n, where);
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = number(a[i], where + "[" + std::to_string(i) + "]");
    }
    return v;
}

inline Eigen::MatrixXd matrix(const toml::node& n, const std::string& where) {
    const auto& rows = array(n, where);
    if (rows.empty()) {
        throw ModelError(where, "matrix must have at least one row");
    }
    Eigen::MatrixXd m;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto row = vector(rows[r], where + "[" + std::to_string(r) + "]");
        if (r == 0) {
            m.resize(static_cast<Eigen::Index>(rows.size()), row.size());
        } else if (row.size() != m.cols()) {
            throw ModelError(where + "[" + std::to_string(r) + "]", "rows must have equal length");
        }
        m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return m;
}

inline Box box(const toml::node& n, const std::string& where) {
    const auto& a = array(n, where);
    Box b;
    if (a.size() == 2 && !a[0].is_array()) {
        b.lo = {number(a[0], where + "[0]")};
        b.hi = {number(a[1], where + "[1]")};
        return b;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto w = where + "[" + std::to_string(i) + "]";
        const auto& interval = array(a[i], w);
        if (interval.size() != 2) {
            throw ModelError(w, "expected [lo, hi]");
        }
        b.lo.push_back(number(interval[0], w + "[0]"));
        b.hi.push_back(number(interval[1], w + "[1]"));
    }
    return b;
}

inline BoxUnion boxes(const toml::table& t, const std::string& key, const std::string& where, bool required) {
    const auto* n = t.get(key);
    if (n == nullptr) {
        if (required) {
            throw ModelError(where + "." + key, "missing");
        }
        return {};
    }
    const auto& a = array(*n, where + "." + key);
    BoxUnion out;
    for (std::size_t i = 0; i < a.size(); ++i) {
        out.push_back(box(a[i], where + "." + key + "[" + std::to_string(i) + "]"));
    }
    return out;
}

inline KFunction kfunction(const toml::node& n, const std::string& where) {
    const auto* t = n.as_table();
    if (t == nullptr) {
        throw ModelError(where, "expected an inline table with a type");
    }
    const auto type = (*t)["type"].value<std::string>();
    if (!type) {
        throw ModelError(where + ".type", "missing");
    }
    const auto field = [&](const char* key) {
        const auto* v = t->get(key);
        if (v == nullptr) {
            throw ModelError(where + "." + key, "missing");
        }
        return number(*v, where + "." + key);
    };
    try {
        if (*type == "linear") {
            reject_unknown(*t, where, {"type", "gain"});
            return KFunction::linear(field("gain"));
        }
        if (*type == "power") {
            reject_unknown(*t, where, {"type", "gain", "exponent"});
            return KFunction::power(field("gain"), field("exponent"));
        }
        if (*type == "table") {
            reject_unknown(*t, where, {"type", "points"});
            const auto* pts = t->get("points");
            if (pts == nullptr) {
                throw ModelError(where + ".points", "missing");
            }
            std::vector<std::pair<double, double>> points;
            const auto& a = array(*pts, where + ".points");
            for (std::size_t i = 0; i < a.size(); ++i) {
                const auto v = vector(a[i], where + ".points[" + std::to_string(i) + "]");
                if (v.size() != 2) {
                    throw ModelError(where + ".points[" + std::to_string(i) + "]", "expected [r, value]");
                }
                points.emplace_back(v(0), v(1));
            }
            return KFunction::table(std::move(points));
        }
    } catch (const PreconditionError& e) {
        throw ModelError(where, e.what());
    }
    throw ModelError(where + ".type", "unknown K-function type \"" + *type + "\"");
}

inline KFunction kfunction_at(const toml::table& t, const char* key, const std::string& where) {
    const auto* n = t.get(key);
    if (n == nullptr) {
        throw ModelError(where + "." + key, "missing");
    }
    return kfunction(*n, where + "." + key);
}

inline std::optional<double> optional_number(const toml::table& t, const char* key, const std::string& where) {
    const auto* n = t.get(key);
    if (n == nullptr) {
        return std::nullopt;
    }
    return number(*n, where + "." + key);
}

} // namespace detail::toml_io

[[nodiscard]] inline AbstractionConfig load_abstraction_config(std::string_view text,
                                                               std::string_view source = "config") {
    using namespace detail::toml_io;
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        throw ModelError("line " + std::to_string(e.source().begin.line) + ", column " +
                             std::to_string(e.source().begin.column),
                         std::string(e.description()));
    }
    reject_unknown(root, "", {"dynamics", "output", "domains", "certificate", "quantization"});

    const auto& dyn_t = table_at(root, "dynamics", "");
    reject_unknown(dyn_t, "dynamics", {"A", "B", "c"});
    AffineDynamics dyn;
    if (dyn_t.get("A") == nullptr) {
        throw ModelError("dynamics.A", "missing");
    }
    if (dyn_t.get("B") == nullptr) {
        throw ModelError("dynamics.B", "missing");
    }
    dyn.A = matrix(*dyn_t.get("A"), "dynamics.A");
    dyn.B = matrix(*dyn_t.get("B"), "dynamics.B");
    if (const auto* c = dyn_t.get("c")) {
        dyn.c = vector(*c, "dynamics.c");
    }

    std::optional<AffineOutput> output;
    std::optional<KFunction> alpha;
    if (const auto* out_t = root["output"].as_table()) {
        reject_unknown(*out_t, "output", {"C", "d", "alpha"});
        if (const auto* c = out_t->get("C")) {
            AffineOutput o;
            o.C = matrix(*c, "output.C");
            if (const auto* d = out_t->get("d")) {
                o.d = vector(*d, "output.d");
            }
            output = std::move(o);
        } else if (out_t->get("d") != nullptr) {
            throw ModelError("output.d", "requires output.C");
        }
        if (const auto* a = out_t->get("alpha")) {
            alpha = kfunction(*a, "output.alpha");
        }
    }

    const auto& dom_t = table_at(root, "domains", "");
    reject_unknown(dom_t, "domains", {"state", "secret", "complement", "input"});
    Domains domains{boxes(dom_t, "state", "domains", true), boxes(dom_t, "secret", "domains", false),
                    boxes(dom_t, "complement", "domains", true), boxes(dom_t, "input", "domains", true)};

    auto system = ControlSystem::affine(dyn, std::move(domains), output, alpha);

    std::optional<Certificate> certificate;
    bool derived = false;
    if (const auto* cert_t = root["certificate"].as_table()) {
        if (const auto derive = (*cert_t)["derive"].value<std::string>()) {
            reject_unknown(*cert_t, "certificate", {"derive", "type"});
            if (*derive != "linear") {
                throw ModelError("certificate.derive", "only \"linear\" is supported");
            }
            try {
                certificate = linear_certificate(dyn.A, dyn.B).certificate;
            } catch (const PreconditionError& e) {
                throw ModelError("certificate.derive", e.what());
            }
            derived = true;
        } else {
            const auto type = (*cert_t)["type"].value<std::string>();
            if (!type) {
                throw ModelError("certificate.type", "missing");
            }
            if (*type == "iss") {
                reject_unknown(*cert_t, "certificate", {"type", "beta1", "gamma"});
                certificate = IssCertificate{kfunction_at(*cert_t, "beta1", "certificate"),
                                             kfunction_at(*cert_t, "gamma", "certificate")};
            } else if (*type == "lyapunov") {
                reject_unknown(*cert_t, "certificate",
                               {"type", "alpha1", "alpha2", "kappa", "lambda", "gamma_hat", "rho", "sigma"});
                LyapunovCertificate lc{kfunction_at(*cert_t, "alpha1", "certificate"),
                                       kfunction_at(*cert_t, "alpha2", "certificate"),
                                       kfunction_at(*cert_t, "kappa", "certificate"),
                                       kfunction_at(*cert_t, "lambda", "certificate"),
                                       kfunction_at(*cert_t, "gamma_hat", "certificate"),
                                       std::nullopt,
                                       std::nullopt};
                if (cert_t->get("rho") != nullptr) {
                    lc.rho = kfunction_at(*cert_t, "rho", "certificate");
                }
                if (cert_t->get("sigma") != nullptr) {
                    lc.sigma = kfunction_at(*cert_t, "sigma", "certificate");
                }
                certificate = std::move(lc);
            } else {
                throw ModelError("certificate.type", "expected \"iss\" or \"lyapunov\"");
            }
        }
    }

    std::optional<double> eta;
    std::optional<double> mu;
    std::optional<double> epsilon;
    if (const auto* q_t = root["quantization"].as_table()) {
        reject_unknown(*q_t, "quantization", {"eta", "mu", "epsilon"});
        eta = optional_number(*q_t, "eta", "quantization");
        mu = optional_number(*q_t, "mu", "quantization");
        epsilon = optional_number(*q_t, "epsilon", "quantization");
    }
    return AbstractionConfig{std::move(system), std::move(certificate), derived, eta, mu, epsilon};
}

[[nodiscard]] inline AbstractionConfig load_abstraction_config_file(const std::filesystem::path& path) {
    return load_abstraction_config(detail::read_file(path.string()), path.string());
}

} // namespace opacity
