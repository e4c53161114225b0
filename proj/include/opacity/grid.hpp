// Copyright (c) approx-opacity contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "opacity/error.hpp"

namespace opacity {

using Point = std::vector<double>;
/// Integer lattice coordinates; the point is index * pitch.
using LatticeIndex = std::vector<std::int64_t>;

/// Closed box prod_i [lo_i, hi_i] with lo_i < hi_i.
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    [[nodiscard]] std::size_t dim() const noexcept { return lo.size(); }
};

using BoxUnion = std::vector<Box>;

/// Slack for lattice rounding, relative to the pitch.
inline constexpr double kLatticeSlack = 1e-9;

inline void validate_box(const Box& b, std::size_t dim, const std::string& what) {
    if (b.lo.size() != dim || b.hi.size() != dim) {
        throw ModelError(what, "box dimension " + std::to_string(b.lo.size()) + " does not match " +
                                   std::to_string(dim));
    }
    for (std::size_t i = 0; i < dim; ++i) {
        if (!std::isfinite(b.lo[i]) || !std::isfinite(b.hi[i]) || !(b.lo[i] < b.hi[i])) {
            throw ModelError(what, "box bounds must be finite with lo < hi");
        }
    }
}

/// Smallest side length over all boxes; +inf for an empty union.
[[nodiscard]] inline double span(const BoxUnion& u) {
    double s = std::numeric_limits<double>::infinity();
    for (const auto& b : u) {
        for (std::size_t i = 0; i < b.dim(); ++i) {
            s = std::min(s, b.hi[i] - b.lo[i]);
        }
    }
    return s;
}

[[nodiscard]] inline bool contains(const Box& b, const Point& x, double tol = 0.0) {
    for (std::size_t i = 0; i < b.dim(); ++i) {
        if (x[i] < b.lo[i] - tol || x[i] > b.hi[i] + tol) {
            return false;
        }
    }
    return true;
}

[[nodiscard]] inline bool contains(const BoxUnion& u, const Point& x, double tol = 0.0) {
    return std::any_of(u.begin(), u.end(), [&](const Box& b) { return contains(b, x, tol); });
}

/// Lattice index range [first, last] of a box along one axis.
[[nodiscard]] inline std::pair<std::int64_t, std::int64_t> lattice_range(double lo, double hi, double pitch) {
    return {static_cast<std::int64_t>(std::ceil(lo / pitch - kLatticeSlack)),
            static_cast<std::int64_t>(std::floor(hi / pitch + kLatticeSlack))};
}

[[nodiscard]] inline bool lattice_contains(const Box& b, const LatticeIndex& k, double pitch) {
    for (std::size_t i = 0; i < b.dim(); ++i) {
        const auto [first, last] = lattice_range(b.lo[i], b.hi[i], pitch);
        if (k[i] < first || k[i] > last) {
            return false;
        }
    }
    return true;
}

[[nodiscard]] inline bool lattice_contains(const BoxUnion& u, const LatticeIndex& k, double pitch) {
    return std::any_of(u.begin(), u.end(), [&](const Box& b) { return lattice_contains(b, k, pitch); });
}

[[nodiscard]] inline Point lattice_point(const LatticeIndex& k, double pitch) {
    Point p(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) {
        p[i] = static_cast<double>(k[i]) * pitch;
    }
    return p;
}

/// Origin-anchored lattice indices inside the union, deduplicated and in lexicographic order.
[[nodiscard]] inline std::vector<LatticeIndex> grid_indices(const BoxUnion& u, double pitch) {
    if (!(pitch > 0.0)) {
        throw PreconditionError("grid pitch must be positive");
    }
    if (u.empty()) {
        return {};
    }
    if (pitch > span(u) * (1.0 + kLatticeSlack)) {
        throw PreconditionError("grid pitch " + std::to_string(pitch) + " exceeds span " + std::to_string(span(u)));
    }
    std::set<LatticeIndex> out;
    for (const auto& b : u) {
        const std::size_t n = b.dim();
        std::vector<std::pair<std::int64_t, std::int64_t>> ranges(n);
        bool empty = n == 0;
        for (std::size_t i = 0; i < n; ++i) {
            ranges[i] = lattice_range(b.lo[i], b.hi[i], pitch);
            empty = empty || ranges[i].first > ranges[i].second;
        }
        if (empty) {
            continue;
        }
        LatticeIndex k(n);
        for (std::size_t i = 0; i < n; ++i) {
            k[i] = ranges[i].first;
        }
        // Odometer over the index box, last axis fastest.
        while (true) {
            out.insert(k);
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
    return {out.begin(), out.end()};
}

/// Grid points of the union with the given pitch.
[[nodiscard]] inline std::vector<Point> grid_points(const BoxUnion& u, double pitch) {
    std::vector<Point> out;
    for (const auto& k : grid_indices(u, pitch)) {
        out.push_back(lattice_point(k, pitch));
    }
    return out;
}

[[nodiscard]] inline double inf_distance(const Point& a, const Point& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, std::fabs(a[i] - b[i]));
    }
    return d;
}

} // namespace opacity
