// Copyright (c) approx-opacity contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <vector>

namespace opacity {

using StateIndex = std::size_t;
using InputIndex = std::size_t;

/// Fixed-universe bitset over the state indices of one system.
///
/// Sets are compared lexicographically by their ascending member lists, which is the
/// canonical order used for estimator nodes. Binary operations require equal universes.
class StateSet {
  public:
    StateSet() = default;
    explicit StateSet(std::size_t universe) : universe_(universe), words_((universe + 63) / 64, 0) {}
    StateSet(std::size_t universe, std::initializer_list<StateIndex> members) : StateSet(universe) {
        for (const auto m : members) {
            insert(m);
        }
    }

    static StateSet full(std::size_t universe) {
        StateSet s(universe);
        for (auto& w : s.words_) {
            w = ~std::uint64_t{0};
        }
        s.trim();
        return s;
    }

    [[nodiscard]] std::size_t universe() const noexcept { return universe_; }

    [[nodiscard]] bool contains(StateIndex i) const noexcept {
        return i < universe_ && ((words_[i / 64] >> (i % 64)) & 1U) != 0;
    }
    void insert(StateIndex i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
    void erase(StateIndex i) { words_[i / 64] &= ~(std::uint64_t{1} << (i % 64)); }

    [[nodiscard]] bool empty() const noexcept {
        for (const auto w : words_) {
            if (w != 0) {
                return false;
            }
        }
        return true;
    }

    [[nodiscard]] std::size_t size() const noexcept {
        std::size_t n = 0;
        for (const auto w : words_) {
            n += static_cast<std::size_t>(std::popcount(w));
        }
        return n;
    }

    [[nodiscard]] bool is_subset_of(const StateSet& other) const noexcept {
        for (std::size_t k = 0; k < words_.size(); ++k) {
            if ((words_[k] & ~other.words_[k]) != 0) {
                return false;
            }
        }
        return true;
    }

    [[nodiscard]] bool intersects(const StateSet& other) const noexcept {
        for (std::size_t k = 0; k < words_.size(); ++k) {
            if ((words_[k] & other.words_[k]) != 0) {
                return true;
            }
        }
        return false;
    }

    StateSet& operator|=(const StateSet& o) noexcept {
        for (std::size_t k = 0; k < words_.size(); ++k) {
            words_[k] |= o.words_[k];
        }
        return *this;
    }
    StateSet& operator&=(const StateSet& o) noexcept {
        for (std::size_t k = 0; k < words_.size(); ++k) {
            words_[k] &= o.words_[k];
        }
        return *this;
    }
    /// Set difference.
    StateSet& operator-=(const StateSet& o) noexcept {
        for (std::size_t k = 0; k < words_.size(); ++k) {
            words_[k] &= ~o.words_[k];
        }
        return *this;
    }

    friend StateSet operator|(StateSet a, const StateSet& b) { return a |= b; }
    friend StateSet operator&(StateSet a, const StateSet& b) { return a &= b; }
    friend StateSet operator-(StateSet a, const StateSet& b) { return a -= b; }

    /// Complement within the universe.
    [[nodiscard]] StateSet complement() const {
        StateSet c(universe_);
        for (std::size_t k = 0; k < words_.size(); ++k) {
            c.words_[k] = ~words_[k];
        }
        c.trim();
        return c;
    }

    template <typename F>
    void for_each(F&& f) const {
        for (std::size_t k = 0; k < words_.size(); ++k) {
            auto w = words_[k];
            while (w != 0) {
                const auto bit = static_cast<std::size_t>(std::countr_zero(w));
                f(k * 64 + bit);
                w &= w - 1;
            }
        }
    }

    [[nodiscard]] std::vector<StateIndex> members() const {
        std::vector<StateIndex> out;
        out.reserve(size());
        for_each([&](StateIndex i) { out.push_back(i); });
        return out;
    }

    friend bool operator==(const StateSet& a, const StateSet& b) noexcept {
        return a.universe_ == b.universe_ && a.words_ == b.words_;
    }

    /// Lexicographic order of the ascending member lists.
    friend std::strong_ordering operator<=>(const StateSet& a, const StateSet& b) noexcept {
        if (a.universe_ != b.universe_) {
            return a.universe_ <=> b.universe_;
        }
        for (std::size_t k = 0; k < a.words_.size(); ++k) {
            const auto diff = a.words_[k] ^ b.words_[k];
            if (diff == 0) {
                continue;
            }
            const auto bit = static_cast<std::size_t>(std::countr_zero(diff));
            const StateSet& with = ((a.words_[k] >> bit) & 1U) != 0 ? a : b;
            const StateSet& without = &with == &a ? b : a;
            // Below the first difference the member lists agree. The set holding the differing
            // element is smaller unless the other set has already run out of members.
            const bool other_has_more = without.has_member_above(k * 64 + bit);
            const bool a_smaller = (&with == &a) == other_has_more;
            return a_smaller ? std::strong_ordering::less : std::strong_ordering::greater;
        }
        return std::strong_ordering::equal;
    }

    [[nodiscard]] std::size_t hash() const noexcept {
        std::size_t h = std::hash<std::size_t>{}(universe_);
        for (const auto w : words_) {
            h ^= std::hash<std::uint64_t>{}(w) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return h;
    }

  private:
    [[nodiscard]] bool has_member_above(std::size_t i) const noexcept {
        std::size_t k = i / 64;
        const std::size_t bit = i % 64;
        std::uint64_t w = bit == 63 ? 0 : (words_[k] >> (bit + 1));
        if (w != 0) {
            return true;
        }
        for (++k; k < words_.size(); ++k) {
            if (words_[k] != 0) {
                return true;
            }
        }
        return false;
    }

    void trim() noexcept {
        if (universe_ % 64 != 0 && !words_.empty()) {
            words_.back() &= (std::uint64_t{1} << (universe_ % 64)) - 1;
        }
    }

    std::size_t universe_ = 0;
    std::vector<std::uint64_t> words_;
};

struct StateSetHash {
    std::size_t operator()(const StateSet& s) const noexcept { return s.hash(); }
};

} // namespace opacity
