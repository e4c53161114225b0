// Copyright (c) approx-opacity contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "opacity/error.hpp"

namespace opacity {

/// Comparison function r -> g r, r -> g r^p, or a monotone piecewise-linear table.
///
/// Tables start at (0,0), are strictly increasing in both coordinates and extend past the last
/// point with the slope of the last segment, so every form with positive gain is unbounded.
/// A linear gain of 0 is accepted for certificates of dead-beat dynamics; it is not invertible.
class KFunction {
public:
    enum class Form { Linear, Power, Table };

    /// The identity r -> r.
    KFunction() = default;

    static KFunction linear(double gain) {
        if (!(gain >= 0.0) || !std::isfinite(gain)) {
            throw PreconditionError("linear K-function gain must be finite and nonnegative");
        }
        KFunction k;
        k.form_ = Form::Linear;
        k.gain_ = gain;
        return k;
    }

    static KFunction power(double gain, double exponent) {
        if (!(gain > 0.0) || !std::isfinite(gain) || !(exponent > 0.0) || !std::isfinite(exponent)) {
            throw PreconditionError("power K-function needs positive finite gain and exponent");
        }
        KFunction k;
        k.form_ = Form::Power;
        k.gain_ = gain;
        k.exponent_ = exponent;
        return k;
    }

    static KFunction table(std::vector<std::pair<double, double>> points) {
        if (points.size() < 2) {
            throw PreconditionError("K-function table needs at least two points");
        }
        if (points.front().first != 0.0 || points.front().second != 0.0) {
            throw PreconditionError("K-function table must start at (0, 0)");
        }
        for (std::size_t i = 1; i < points.size(); ++i) {
            const auto [r0, v0] = points[i - 1];
            const auto [r1, v1] = points[i];
            if (!std::isfinite(r1) || !std::isfinite(v1) || !(r1 > r0) || !(v1 > v0)) {
                throw PreconditionError("K-function table must be strictly increasing in both coordinates");
            }
        }
        KFunction k;
        k.form_ = Form::Table;
        k.points_ = std::move(points);
        return k;
    }

    static KFunction identity() { return linear(1.0); }

    [[nodiscard]] Form form() const noexcept { return form_; }
    [[nodiscard]] double gain() const noexcept { return gain_; }
    [[nodiscard]] double exponent() const noexcept { return exponent_; }
    [[nodiscard]] const std::vector<std::pair<double, double>>& points() const noexcept { return points_; }

    [[nodiscard]] double operator()(double r) const {
        if (!(r >= 0.0)) {
            throw PreconditionError("K-function argument must be nonnegative");
        }
        switch (form_) {
        case Form::Linear:
            return gain_ * r;
        case Form::Power:
            return gain_ * std::pow(r, exponent_);
        case Form::Table:
            return interpolate(points_, r, false);
        }
        return 0.0;
    }

    [[nodiscard]] bool invertible() const noexcept { return form_ != Form::Linear || gain_ > 0.0; }

    [[nodiscard]] double inverse(double v) const {
        if (!(v >= 0.0)) {
            throw PreconditionError("K-function inverse argument must be nonnegative");
        }
        if (!invertible()) {
            throw PreconditionError("K-function with zero gain is not invertible");
        }
        switch (form_) {
        case Form::Linear:
            return v / gain_;
        case Form::Power:
            return std::pow(v / gain_, 1.0 / exponent_);
        case Form::Table:
            return interpolate(points_, v, true);
        }
        return 0.0;
    }

    [[nodiscard]] std::string describe() const {
        std::ostringstream out;
        out.precision(12);
        switch (form_) {
        case Form::Linear:
            out << gain_ << "*r";
            break;
        case Form::Power:
            out << gain_ << "*r^" << exponent_;
            break;
        case Form::Table:
            out << "table(";
            for (std::size_t i = 0; i < points_.size(); ++i) {
                out << (i ? ", " : "") << "(" << points_[i].first << "," << points_[i].second << ")";
            }
            out << ")";
            break;
        }
        return out.str();
    }

private:
    // Piecewise-linear evaluation; `inverse` swaps the coordinates.
    static double interpolate(const std::vector<std::pair<double, double>>& pts, double x, bool inverse) {
        const auto key = [&](std::size_t i) { return inverse ? pts[i].second : pts[i].first; };
        const auto val = [&](std::size_t i) { return inverse ? pts[i].first : pts[i].second; };
        std::size_t seg = pts.size() - 2;
        for (std::size_t i = 1; i < pts.size(); ++i) {
            if (x <= key(i)) {
                seg = i - 1;
                break;
            }
        }
        const double t = (x - key(seg)) / (key(seg + 1) - key(seg));
        return val(seg) + t * (val(seg + 1) - val(seg));
    }

    Form form_ = Form::Linear;
    double gain_ = 1.0;
    double exponent_ = 1.0;
    std::vector<std::pair<double, double>> points_;
};

} // namespace opacity
