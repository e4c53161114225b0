// Copyright (c) approx-opacity contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "opacity/error.hpp"
#include "opacity/estimator.hpp"
#include "opacity/grid.hpp"
#include "opacity/kfunction.hpp"
#include "opacity/model_io.hpp"
#include "opacity/system.hpp"
#include "opacity/verify.hpp"

namespace opacity {

struct Domains {
    BoxUnion state;
    BoxUnion secret;
    /// The part of the state domain outside the secret domain, as a box union.
    BoxUnion complement;
    BoxUnion input;
};

/// x+ = A x + B u + c.
struct AffineDynamics {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::VectorXd c;
};

/// y = C x + d.
struct AffineOutput {
    Eigen::MatrixXd C;
    Eigen::VectorXd d;
};

/// Discrete-time control system on box-union domains.
class ControlSystem {
public:
    using Map = std::function<Point(const Point&, const Point&)>;
    using OutputMap = std::function<Point(const Point&)>;

    /// Affine dynamics with an affine output map (identity when absent). The output Lipschitz
    /// bound defaults to r -> ||C||_inf r.
    static ControlSystem affine(AffineDynamics dyn, Domains domains, std::optional<AffineOutput> output = std::nullopt,
                                std::optional<KFunction> alpha = std::nullopt) {
        const auto n = static_cast<std::size_t>(dyn.A.rows());
        if (dyn.A.cols() != dyn.A.rows() || n == 0) {
            throw ModelError("dynamics.A", "must be a nonempty square matrix");
        }
        if (static_cast<std::size_t>(dyn.B.rows()) != n || dyn.B.cols() == 0) {
            throw ModelError("dynamics.B", "must have as many rows as A and at least one column");
        }
        if (dyn.c.size() == 0) {
            dyn.c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        }
        if (static_cast<std::size_t>(dyn.c.size()) != n) {
            throw ModelError("dynamics.c", "length must match the state dimension");
        }
        ControlSystem cs;
        cs.n_ = n;
        cs.m_ = static_cast<std::size_t>(dyn.B.cols());
        cs.domains_ = std::move(domains);
        cs.affine_ = dyn;
        cs.f_ = [dyn](const Point& x, const Point& u) {
            const Eigen::VectorXd y = dyn.A * Eigen::Map<const Eigen::VectorXd>(x.data(), dyn.A.cols()) +
                                      dyn.B * Eigen::Map<const Eigen::VectorXd>(u.data(), dyn.B.cols()) + dyn.c;
            return Point(y.data(), y.data() + y.size());
        };
        if (output) {
            if (static_cast<std::size_t>(output->C.cols()) != n || output->C.rows() == 0) {
                throw ModelError("output.C", "must have one column per state dimension");
            }
            if (output->d.size() == 0) {
                output->d = Eigen::VectorXd::Zero(output->C.rows());
            }
            if (output->d.size() != output->C.rows()) {
                throw ModelError("output.d", "length must match the rows of C");
            }
            const AffineOutput out = *output;
            cs.h_ = [out](const Point& x) {
                const Eigen::VectorXd y = out.C * Eigen::Map<const Eigen::VectorXd>(x.data(), out.C.cols()) + out.d;
                return Point(y.data(), y.data() + y.size());
            };
            cs.alpha_ = alpha.value_or(KFunction::linear(out.C.cwiseAbs().rowwise().sum().maxCoeff()));
        } else {
            cs.alpha_ = alpha.value_or(KFunction::identity());
        }
        cs.validate();
        return cs;
    }

    /// Arbitrary dynamics and output map. `alpha` must bound the output map's modulus of continuity.
    static ControlSystem custom(std::size_t state_dim, std::size_t input_dim, Map f, Domains domains,
                                OutputMap h = nullptr, KFunction alpha = KFunction::identity()) {
        ControlSystem cs;
        cs.n_ = state_dim;
        cs.m_ = input_dim;
        cs.f_ = std::move(f);
        cs.h_ = std::move(h);
        cs.alpha_ = alpha;
        cs.domains_ = std::move(domains);
        cs.validate();
        return cs;
    }

    [[nodiscard]] std::size_t state_dim() const noexcept { return n_; }
    [[nodiscard]] std::size_t input_dim() const noexcept { return m_; }
    [[nodiscard]] const Domains& domains() const noexcept { return domains_; }
    [[nodiscard]] const KFunction& alpha() const noexcept { return alpha_; }
    [[nodiscard]] const std::optional<AffineDynamics>& affine_dynamics() const noexcept { return affine_; }

    [[nodiscard]] Point step(const Point& x, const Point& u) const { return f_(x, u); }
    [[nodiscard]] Point output(const Point& x) const { return h_ ? h_(x) : x; }

private:
    ControlSystem() = default;

    void validate() const {
        if (n_ == 0 || m_ == 0) {
            throw ModelError("dynamics", "state and input dimensions must be positive");
        }
        if (domains_.state.empty()) {
            throw ModelError("domains.state", "must contain at least one box");
        }
        if (domains_.input.empty()) {
            throw ModelError("domains.input", "must contain at least one box");
        }
        const auto check = [](const BoxUnion& u, std::size_t dim, const std::string& name) {
            for (std::size_t i = 0; i < u.size(); ++i) {
                validate_box(u[i], dim, name + "[" + std::to_string(i) + "]");
            }
        };
        check(domains_.state, n_, "domains.state");
        check(domains_.secret, n_, "domains.secret");
        check(domains_.complement, n_, "domains.complement");
        check(domains_.input, m_, "domains.input");
    }

    std::size_t n_ = 0;
    std::size_t m_ = 0;
    Domains domains_;
    Map f_;
    OutputMap h_;
    KFunction alpha_;
    std::optional<AffineDynamics> affine_;
};

/// State pitch eta, input pitch mu and precision epsilon.
struct Quantization {
    double eta = 0.0;
    double mu = 0.0;
    double epsilon = 0.0;
};

/// Pitch bounds: 0 < eta <= min(span(secret), span(complement)) and 0 < mu <= span(input).
inline void validate_quantization(const ControlSystem& cs, const Quantization& q) {
    const auto& d = cs.domains();
    const double eta_max = std::min(span(d.secret), span(d.complement));
    const double mu_max = span(d.input);
    if (!(q.eta > 0.0) || q.eta > eta_max * (1.0 + kLatticeSlack)) {
        throw PreconditionError("eta must satisfy 0 < eta <= " + std::to_string(eta_max));
    }
    if (!(q.mu > 0.0) || q.mu > mu_max * (1.0 + kLatticeSlack)) {
        throw PreconditionError("mu must satisfy 0 < mu <= " + std::to_string(mu_max));
    }
    if (!(q.epsilon > 0.0)) {
        throw PreconditionError("epsilon must be positive");
    }
}

// ---- certificates ---------------------------------------------------------------------------

/// One-step incremental stability bound ||f(x,u) - f(x',u')|| <= beta1(||x-x'||) + gamma(||u-u'||).
struct IssCertificate {
    KFunction beta1;
    KFunction gamma;
};

/// Lyapunov form: a1(||x-x'||) <= V(x,x') <= a2(||x-x'||) and
/// V(f(x,u), f(x',u')) <= max(kappa(V(x,x')), lambda(||u-u'||)), plus the user-asserted bound
/// V(x,x') - V(x',x'') <= gamma_hat(||x-x''||). rho and sigma are kept as metadata only.
struct LyapunovCertificate {
    KFunction alpha1;
    KFunction alpha2;
    KFunction kappa;
    KFunction lambda;
    KFunction gamma_hat;
    std::optional<KFunction> rho;
    std::optional<KFunction> sigma;
};

using Certificate = std::variant<IssCertificate, LyapunovCertificate>;

/// Margins this close to zero (relative to the right-hand side) are reported as 0.
inline constexpr double kMarginRoundoff = 1e-12;

namespace detail {

inline double snap_margin(double rhs, double lhs) {
    const double m = rhs - lhs;
    return std::fabs(m) <= kMarginRoundoff * std::max(1.0, std::fabs(rhs)) ? 0.0 : m;
}

inline double relation_radius(const KFunction& alpha, double epsilon) {
    if (!alpha.invertible()) {
        throw PreconditionError("output bound alpha must be invertible at epsilon");
    }
    return alpha.inverse(epsilon);
}

} // namespace detail

struct IssCheck {
    bool feasible = false;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;
    /// beta1(r) < r at r = alpha^-1(epsilon); some quantization is feasible iff this holds.
    bool contraction_holds = false;
};

/// Evaluates beta1(r) + gamma(mu) + eta <= r with r = alpha^-1(epsilon).
[[nodiscard]] inline IssCheck check_quantization_iss(const KFunction& beta1, const KFunction& gamma,
                                                     const KFunction& alpha, const Quantization& q) {
    const double r = detail::relation_radius(alpha, q.epsilon);
    IssCheck out;
    out.rhs = r;
    out.lhs = beta1(r) + gamma(q.mu) + q.eta;
    out.margin = detail::snap_margin(out.rhs, out.lhs);
    out.feasible = out.margin >= 0.0;
    out.contraction_holds = beta1(r) < r;
    return out;
}

struct LyapunovCheck {
    bool feasible = false;
    /// a2(eta) <= a1(r).
    double level_lhs = 0.0;
    double level_margin = 0.0;
    /// max(kappa(a1(r)), lambda(mu)) + gamma_hat(eta) <= a1(r).
    double decay_lhs = 0.0;
    double decay_margin = 0.0;
    double rhs = 0.0;
    /// kappa(a1(r)) < a1(r); some quantization is feasible iff this holds.
    bool contraction_holds = false;
};

namespace detail {

/// Rejects kappa unless kappa(s) < s on a geometric sample grid around `scale`.
inline void require_contractive(const KFunction& kappa, double scale) {
    const double base = scale > 0.0 ? scale : 1.0;
    for (int j = -30; j <= 30; ++j) {
        for (const double frac : {1.0, 1.25, 1.5, 1.75}) {
            const double s = base * frac * std::ldexp(1.0, j);
            if (!(kappa(s) < s)) {
                throw PreconditionError("kappa is not contractive: kappa(" + std::to_string(s) +
                                        ") >= " + std::to_string(s));
            }
        }
    }
}

} // namespace detail

[[nodiscard]] inline LyapunovCheck check_quantization_lyapunov(const LyapunovCertificate& c, const KFunction& alpha,
                                                               const Quantization& q) {
    const double r = detail::relation_radius(alpha, q.epsilon);
    const double level = c.alpha1(r);
    detail::require_contractive(c.kappa, level);
    LyapunovCheck out;
    out.rhs = level;
    out.level_lhs = c.alpha2(q.eta);
    out.level_margin = detail::snap_margin(level, out.level_lhs);
    out.decay_lhs = std::max(c.kappa(level), c.lambda(q.mu)) + c.gamma_hat(q.eta);
    out.decay_margin = detail::snap_margin(level, out.decay_lhs);
    out.feasible = out.level_margin >= 0.0 && out.decay_margin >= 0.0;
    out.contraction_holds = c.kappa(level) < level;
    return out;
}

[[nodiscard]] inline bool quantization_feasible(const Certificate& cert, const KFunction& alpha,
                                                const Quantization& q) {
    if (const auto* iss = std::get_if<IssCertificate>(&cert)) {
        return check_quantization_iss(iss->beta1, iss->gamma, alpha, q).feasible;
    }
    return check_quantization_lyapunov(std::get<LyapunovCertificate>(cert), alpha, q).feasible;
}

struct QuantizationSuggestion {
    std::optional<Quantization> quantization;
    std::string reason;
};

/// Largest eta (bisection to relative tolerance 1e-9) with mu = eta/2 satisfying the certificate's
/// inequalities, then clamped to the pitch bounds of the domains.
[[nodiscard]] inline QuantizationSuggestion suggest_quantization(const ControlSystem& cs, const Certificate& cert,
                                                                 double epsilon) {
    if (!(epsilon > 0.0)) {
        throw PreconditionError("epsilon must be positive");
    }
    const KFunction& alpha = cs.alpha();
    const double r = detail::relation_radius(alpha, epsilon);
    bool contraction = false;
    if (const auto* iss = std::get_if<IssCertificate>(&cert)) {
        contraction = iss->beta1(r) < r;
    } else {
        const auto& lc = std::get<LyapunovCertificate>(cert);
        detail::require_contractive(lc.kappa, lc.alpha1(r));
        contraction = lc.kappa(lc.alpha1(r)) < lc.alpha1(r);
    }
    if (!contraction) {
        return {std::nullopt, "certificate is not contractive at alpha^-1(epsilon); no quantization is feasible"};
    }
    const auto feasible = [&](double eta) { return quantization_feasible(cert, alpha, {eta, eta / 2.0, epsilon}); };
    double lo = 0.0;
    double hi = r;
    for (int i = 0; i < 200 && feasible(hi); ++i) {
        lo = hi;
        hi *= 2.0;
    }
    while (hi - lo > 1e-9 * hi) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? lo : hi) = mid;
    }
    if (!(lo > 0.0)) {
        return {std::nullopt, "no positive eta satisfies the quantization inequalities"};
    }
    const auto& d = cs.domains();
    Quantization q;
    q.epsilon = epsilon;
    q.eta = std::min({lo, span(d.secret), span(d.complement)});
    q.mu = std::min(q.eta / 2.0, span(d.input));
    if (!(q.eta > 0.0) || !(q.mu > 0.0)) {
        return {std::nullopt, "pitch bounds of the domains leave no feasible quantization"};
    }
    return {q, ""};
}

struct LinearCertificate {
    IssCertificate certificate;
    /// ||A||_inf.
    double a_norm = 0.0;
    /// Certified upper bound on sum_m ||A^m||_inf.
    double series_bound = 0.0;
    /// First power with ||A^m||_inf < 1.
    std::size_t contraction_power = 0;
};

/// beta1(r) = ||A|| r and gamma(r) = ||B|| S r, where S bounds sum_m ||A^m|| (infinity norms).
/// S sums the powers below the first m* with rho = ||A^m*|| < 1 and bounds the tail by
/// submultiplicativity: S = (sum_{i<m*} ||A^i||) / (1 - rho).
[[nodiscard]] inline LinearCertificate linear_certificate(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    if (A.rows() != A.cols() || A.rows() == 0 || B.rows() != A.rows()) {
        throw PreconditionError("linear_certificate needs a square A and B with matching rows");
    }
    const auto norm = [](const Eigen::MatrixXd& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); };
    constexpr std::size_t kMaxPower = 1000;
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(A.rows(), A.cols());
    double head = 0.0;
    for (std::size_t m = 0; m <= kMaxPower; ++m) {
        const double pn = norm(power);
        if (m > 0 && pn < 1.0) {
            LinearCertificate out;
            out.a_norm = norm(A);
            out.series_bound = head / (1.0 - pn);
            out.contraction_power = m;
            out.certificate.beta1 = KFunction::linear(out.a_norm);
            out.certificate.gamma = KFunction::linear(norm(B) * out.series_bound);
            return out;
        }
        head += pn;
        power = power * A;
    }
    throw PreconditionError("summability not certified: no power of A up to 1000 has infinity norm below 1");
}

// ---- symbolic model -------------------------------------------------------------------------

struct SymbolicModel {
    MetricSystem system;
    std::vector<Point> state_points;
    std::vector<Point> input_points;
    Quantization quantization;
    /// Grid pairs (x_q, u_q) with f(x_q, u_q) outside the state domain. They still get every grid
    /// successor within eta.
    std::size_t boundary_escapes = 0;
};

namespace detail {

inline std::string format_point(const Point& p) {
    std::string out = p.size() > 1 ? "(" : "";
    char buf[32];
    for (std::size_t i = 0; i < p.size(); ++i) {
        // Lattice points such as 3 * 0.1 print as 0.3; adding 0.0 turns -0 into 0.
        std::snprintf(buf, sizeof buf, "%.12g", p[i] + 0.0);
        out += (i ? "," : "") + std::string(buf);
    }
    return out + (p.size() > 1 ? ")" : "");
}

} // namespace detail

/// Finite model on the eta-grid of the state domain and the mu-grid of the input domain. Every grid
/// state is initial, secret iff it lies in the secret domain, and steps under u_q to every grid
/// point within eta (infinity norm) of f(x_q, u_q).
[[nodiscard]] inline SymbolicModel build_symbolic_model(const ControlSystem& cs, const Quantization& q) {
    validate_quantization(cs, q);
    const auto& d = cs.domains();
    const auto state_idx = grid_indices(d.state, q.eta);
    const auto input_idx = grid_indices(d.input, q.mu);
    if (state_idx.empty()) {
        throw PreconditionError("state grid is empty");
    }
    if (input_idx.empty()) {
        throw PreconditionError("input grid is empty");
    }
    std::map<LatticeIndex, StateIndex> lookup;
    std::vector<StateRecord> states;
    std::vector<Point> state_points;
    for (const auto& k : state_idx) {
        const Point x = lattice_point(k, q.eta);
        const bool secret = lattice_contains(d.secret, k, q.eta);
        if (!secret && !lattice_contains(d.complement, k, q.eta)) {
            throw ModelError("domains", "grid state " + detail::format_point(x) +
                                            " lies in neither the secret nor the complement domain");
        }
        lookup.emplace(k, states.size());
        states.push_back({detail::format_point(x), cs.output(x), true, secret});
        state_points.push_back(x);
    }
    std::vector<std::string> inputs;
    std::vector<Point> input_points;
    for (const auto& k : input_idx) {
        input_points.push_back(lattice_point(k, q.mu));
        inputs.push_back(detail::format_point(input_points.back()));
    }

    const double reach = q.eta * (1.0 + kLatticeSlack);
    const double domain_tol = q.eta * kLatticeSlack;
    std::size_t escapes = 0;
    std::vector<Transition> transitions;
    for (StateIndex x = 0; x < states.size(); ++x) {
        for (InputIndex u = 0; u < input_points.size(); ++u) {
            const Point y = cs.step(state_points[x], input_points[u]);
            if (!contains(d.state, y, domain_tol)) {
                ++escapes;
            }
            // Candidate lattice indices within eta of y, per axis.
            const std::size_t n = y.size();
            std::vector<std::pair<std::int64_t, std::int64_t>> ranges(n);
            bool empty = false;
            for (std::size_t i = 0; i < n; ++i) {
                ranges[i] = lattice_range(y[i] - q.eta, y[i] + q.eta, q.eta);
                empty = empty || ranges[i].first > ranges[i].second;
            }
            std::size_t found = 0;
            if (!empty) {
                LatticeIndex k(n);
                for (std::size_t i = 0; i < n; ++i) {
                    k[i] = ranges[i].first;
                }
                while (true) {
                    const auto it = lookup.find(k);
                    if (it != lookup.end() && inf_distance(state_points[it->second], y) <= reach) {
                        transitions.push_back({x, u, it->second});
                        ++found;
                    }
                    std::size_t i = n;
                    for (; i > 0; --i) {
                        if (k[i - 1] < ranges[i - 1].second) {
                            ++k[i - 1];
                            break;
                        }
                        k[i - 1] = ranges[i - 1].first;
                    }
                    if (i == 0) {
                        break;
                    }
                }
            }
            if (found == 0) {
                throw ModelError("dynamics", "f(" + states[x].label + ", " + inputs[u] + ") = " +
                                                 detail::format_point(y) +
                                                 " escapes the state domain with no grid point within eta");
            }
        }
    }
    SymbolicModel out{MetricSystem(std::move(states), std::move(inputs), std::move(transitions)),
                      std::move(state_points), std::move(input_points), q, escapes};
    return out;
}

// ---- sampling check of the canonical relation -----------------------------------------------

struct RelationSampleReport {
    std::size_t samples = 0;
    std::size_t counterexamples = 0;
    /// The first few counterexamples, human readable.
    std::vector<std::string> details;
};

namespace detail {

inline Point sample_in(const BoxUnion& u, std::mt19937_64& rng) {
    const auto& box = u[std::uniform_int_distribution<std::size_t>(0, u.size() - 1)(rng)];
    Point p(box.dim());
    for (std::size_t i = 0; i < box.dim(); ++i) {
        p[i] = std::uniform_real_distribution<double>(box.lo[i], box.hi[i])(rng);
    }
    return p;
}

} // namespace detail

/// Samples pairs (x, x_q) with ||x - x_q|| <= alpha^-1(epsilon) and inputs, and checks numerically
/// the steps that make this relation an InitSOP simulation in both directions:
/// the output bound, the certificate's one-step bound, the matching grid successor for a concrete
/// step, and the concrete counterpart of every grid step. Counterexamples falsify the certificate.
[[nodiscard]] inline RelationSampleReport canonical_relation_check(const ControlSystem& cs, const SymbolicModel& model,
                                                                   const IssCertificate& cert,
                                                                   std::size_t sample_count,
                                                                   std::uint64_t seed = 20240617) {
    RelationSampleReport report;
    if (sample_count == 0) {
        return report;
    }
    const auto& q = model.quantization;
    const double r = detail::relation_radius(cs.alpha(), q.epsilon);
    const double tol = 1e-9 * std::max(1.0, r);
    const auto& d = cs.domains();
    const auto& sys = model.system;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_state(0, model.state_points.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_input(0, model.input_points.size() - 1);

    const auto fail = [&](std::size_t i, const Point& x, const Point& xq, const std::string& what) {
        ++report.counterexamples;
        if (report.details.size() < 10) {
            report.details.push_back("sample " + std::to_string(i) + ": x=" + detail::format_point(x) +
                                     " x_q=" + detail::format_point(xq) + ": " + what);
        }
    };

    for (std::size_t i = 0; i < sample_count; ++i) {
        ++report.samples;
        const StateIndex xq_id = pick_state(rng);
        const Point& xq = model.state_points[xq_id];
        // Concrete state in the state domain within r of x_q, by rejection.
        Point x = xq;
        for (int attempt = 0; attempt < 100; ++attempt) {
            Point cand(xq.size());
            for (std::size_t j = 0; j < xq.size(); ++j) {
                cand[j] = std::uniform_real_distribution<double>(xq[j] - r, xq[j] + r)(rng);
            }
            if (contains(d.state, cand)) {
                x = std::move(cand);
                break;
            }
        }
        const double dx = inf_distance(x, xq);

        if (inf_distance(cs.output(x), cs.output(xq)) > q.epsilon + tol) {
            fail(i, x, xq, "output distance exceeds epsilon");
        }

        // Concrete input, matched by the nearest grid input.
        const Point u = detail::sample_in(d.input, rng);
        InputIndex uq_id = 0;
        for (InputIndex k = 1; k < model.input_points.size(); ++k) {
            if (inf_distance(u, model.input_points[k]) < inf_distance(u, model.input_points[uq_id])) {
                uq_id = k;
            }
        }
        const Point& uq = model.input_points[uq_id];
        const Point x_next = cs.step(x, u);
        const Point y = cs.step(xq, uq);
        const double bound = cert.beta1(dx) + cert.gamma(inf_distance(u, uq));
        if (inf_distance(x_next, y) > bound + tol) {
            fail(i, x, xq, "one-step bound violated: ||f(x,u) - f(x_q,u_q)|| exceeds beta1 + gamma");
        }
        double best = std::numeric_limits<double>::infinity();
        for (const StateIndex s : sys.post(xq_id, uq_id)) {
            best = std::min(best, inf_distance(x_next, model.state_points[s]));
        }
        if (best > r + tol) {
            fail(i, x, xq, "no grid successor within alpha^-1(epsilon) of f(x,u)");
        }

        // Every grid step under some grid input is matched by the concrete step under that input.
        const InputIndex v = pick_input(rng);
        const Point x_alt = cs.step(x, model.input_points[v]);
        for (const StateIndex s : sys.post(xq_id, v)) {
            if (inf_distance(x_alt, model.state_points[s]) > r + tol) {
                fail(i, x, xq, "grid successor " + sys.state(s).label + " has no concrete counterpart");
                break;
            }
        }
    }
    return report;
}

// ---- end-to-end verification ----------------------------------------------------------------

enum class PipelineOutcome { Holds, Fails, Inconclusive };

[[nodiscard]] inline const char* to_string(PipelineOutcome o) noexcept {
    switch (o) {
    case PipelineOutcome::Holds:
        return "holds";
    case PipelineOutcome::Fails:
        return "fails";
    case PipelineOutcome::Inconclusive:
        return "inconclusive";
    }
    return "?";
}

struct PipelineResult {
    Property property = Property::Initial;
    double delta = 0.0;
    Quantization quantization;
    std::size_t model_states = 0;
    std::size_t model_inputs = 0;
    std::size_t model_transitions = 0;
    /// The symbolic model and its verdict at delta - 2 epsilon.
    std::shared_ptr<const MetricSystem> model;
    OpacityVerdict abstraction_verdict;
    PipelineOutcome outcome = PipelineOutcome::Inconclusive;
    /// Level the outcome refers to: delta for Holds, delta - 4 epsilon for Fails.
    double conclusion_delta = 0.0;
    std::string explanation;
};

/// Builds the symbolic model, verifies it at delta - 2 epsilon and transfers the verdict to the
/// control system. The model and the control system simulate each other with precision epsilon, so
/// a holding verdict gives "holds at delta" and a failing one gives "fails at delta - 4 epsilon"
/// when that level is nonnegative.
[[nodiscard]] inline PipelineResult end_to_end_verify(const ControlSystem& cs, const Certificate& cert, double epsilon,
                                                      double delta, Property property,
                                                      std::optional<Quantization> quantization = std::nullopt,
                                                      const BuildOptions& opts = {}) {
    if (!(delta >= 0.0)) {
        throw PreconditionError("delta must be nonnegative");
    }
    if (!(epsilon > 0.0)) {
        throw PreconditionError("epsilon must be positive");
    }
    if (epsilon > delta / 2.0 + kMarginRoundoff) {
        throw PreconditionError("precondition ε ≤ δ/2 violated: epsilon " + std::to_string(epsilon) + ", delta " +
                                std::to_string(delta));
    }
    Quantization q;
    if (quantization) {
        q = *quantization;
        q.epsilon = epsilon;
        if (!quantization_feasible(cert, cs.alpha(), q)) {
            throw PreconditionError("infeasible quantization: eta " + std::to_string(q.eta) + ", mu " +
                                    std::to_string(q.mu) + " violate the certificate inequalities");
        }
    } else {
        const auto s = suggest_quantization(cs, cert, epsilon);
        if (!s.quantization) {
            throw PreconditionError("infeasible quantization: " + s.reason);
        }
        q = *s.quantization;
    }
    const auto model = build_symbolic_model(cs, q);
    const double level = std::max(0.0, delta - 2.0 * epsilon);

    PipelineResult out;
    out.property = property;
    out.delta = delta;
    out.quantization = q;
    out.model_states = model.system.size();
    out.model_inputs = model.system.input_count();
    out.model_transitions = model.system.transitions().size();
    out.model = std::make_shared<const MetricSystem>(model.system);
    out.abstraction_verdict = verify(*out.model, property, level, opts);
    if (out.abstraction_verdict.holds) {
        out.outcome = PipelineOutcome::Holds;
        out.conclusion_delta = delta;
        out.explanation = "symbolic model holds at delta - 2 epsilon, so the control system holds at delta";
    } else if (delta - 4.0 * epsilon >= -kMarginRoundoff) {
        out.outcome = PipelineOutcome::Fails;
        out.conclusion_delta = std::max(0.0, delta - 4.0 * epsilon);
        out.explanation = "symbolic model fails at delta - 2 epsilon, so the control system fails at delta - 4 epsilon";
    } else {
        out.outcome = PipelineOutcome::Inconclusive;
        out.conclusion_delta = delta;
        out.explanation = "symbolic model fails at delta - 2 epsilon and delta < 4 epsilon; no conclusion";
    }
    return out;
}

[[nodiscard]] inline Json to_json(const Quantization& q) {
    return Json{{"eta", q.eta}, {"mu", q.mu}, {"epsilon", q.epsilon}};
}

[[nodiscard]] inline Json to_json(const PipelineResult& r) {
    Json j{{"property", to_string(r.property)},
           {"delta", r.delta},
           {"outcome", to_string(r.outcome)},
           {"conclusion_delta", r.conclusion_delta},
           {"explanation", r.explanation},
           {"quantization", to_json(r.quantization)},
           {"model", Json{{"states", r.model_states}, {"inputs", r.model_inputs}, {"transitions", r.model_transitions}}}};
    j["abstraction_verdict"] = to_json(*r.model, r.abstraction_verdict);
    return j;
}

} // namespace opacity
