// Copyright (c) approx-opacity contributors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "opacity/oracle.hpp"
#include "opacity/verify.hpp"
#include "support/fixtures.hpp"
#include "support/random_systems.hpp"

namespace opacity {
namespace {

using namespace opacity::testing;

constexpr double kThresholdTol = 1e-12;

TEST(VerifyCurrent, Ex1) {
    const auto s = ex1();
    const auto v005 = verify_current_state(s, 0.05);
    EXPECT_FALSE(v005.holds);
    ASSERT_TRUE(v005.witness.has_value());
    EXPECT_EQ(v005.witness->run, (opacity::Run{{B, D, B}, {0, 0}}));
    EXPECT_EQ(v005.witness->secret_index, 2u);
    EXPECT_TRUE(v005.trivially_failed);
    EXPECT_EQ(v005.trivial_state, std::optional<StateIndex>(B));

    const auto v01 = verify_current_state(s, 0.1);
    EXPECT_TRUE(v01.holds);
    EXPECT_FALSE(v01.witness.has_value());
    EXPECT_FALSE(v01.trivially_failed);
}

TEST(VerifyInitial, Ex1) {
    const auto s = ex1();
    const auto v01 = verify_initial_state(s, 0.1);
    EXPECT_FALSE(v01.holds);
    ASSERT_TRUE(v01.witness.has_value());
    EXPECT_EQ(v01.witness->run, (opacity::Run{{B, D}, {0}}));
    EXPECT_EQ(v01.witness->secret_index, 0u);
    EXPECT_FALSE(v01.trivially_failed);
    EXPECT_TRUE(verify_initial_state(s, 0.15).holds);
}

TEST(VerifyInfinite, Ex1) {
    const auto s = ex1();
    const auto v01 = verify_infinite_step(s, 0.1);
    EXPECT_FALSE(v01.holds);
    ASSERT_TRUE(v01.witness.has_value());
    EXPECT_TRUE(run_violates(s, 0.1, Property::Infinite, v01.witness->run, v01.witness->secret_index));
    EXPECT_TRUE(verify_infinite_step(s, 0.15).holds);
}

TEST(Threshold, Ex1) {
    const auto s = ex1();
    const auto init = opacity_threshold(s, Property::Initial);
    ASSERT_TRUE(init.has_value());
    EXPECT_NEAR(*init, 0.15, kThresholdTol);
    const auto cur = opacity_threshold(s, Property::Current);
    ASSERT_TRUE(cur.has_value());
    EXPECT_NEAR(*cur, 0.1, kThresholdTol);
}

TEST(Verify, NoSecretsHoldsVacuously) {
    const auto s = with_secrets(ex1(), {false, false, false, false});
    for (const auto p : {Property::Initial, Property::Current, Property::Infinite}) {
        EXPECT_TRUE(verify(s, p, 0.0).holds);
        EXPECT_EQ(opacity_threshold(s, p), std::optional<double>(0.0));
    }
}

TEST(Verify, NoSecretInitialStatesInitialHolds) {
    const auto s = with_secrets(ex1(), {false, false, false, true});
    EXPECT_TRUE(verify_initial_state(s, 0.0).holds);
}

TEST(Verify, NegativeDeltaRejected) {
    EXPECT_THROW((void)verify_initial_state(ex1(), -1.0), PreconditionError);
}

TEST(Verify, ThresholdNoneWhenAlwaysExposed) {
    const MetricSystem s({{"x", {0.0}, true, true}}, {"u"}, {{0, 0, 0}});
    EXPECT_FALSE(opacity_threshold(s, Property::Current).has_value());
}

TEST(Verify, TrivialFailureWithoutPositiveViolationUsesZeroLengthWitness) {
    const MetricSystem s({{"x", {0.0}, true, true}, {"y", {1.0}, true, false}}, {"u"}, {});
    const auto v = verify_initial_state(s, 0.5);
    EXPECT_FALSE(v.holds);
    EXPECT_TRUE(v.trivially_failed);
    ASSERT_TRUE(v.witness.has_value());
    EXPECT_EQ(v.witness->run, (opacity::Run{{0}, {}}));
}

TEST(Verify, MonotoneInDelta) {
    for (const auto& s : random_corpus(150)) {
        const auto cands = candidate_deltas(s);
        for (const auto p : {Property::Initial, Property::Current, Property::Infinite}) {
            bool seen_hold = false;
            for (const double d : cands) {
                const bool h = verify(s, p, d).holds;
                EXPECT_FALSE(seen_hold && !h);
                seen_hold = seen_hold || h;
            }
        }
    }
}

TEST(Verify, InfiniteImpliesInitialAndCurrent) {
    for (const auto& s : random_corpus(150)) {
        for (const double d : candidate_deltas(s)) {
            if (verify_infinite_step(s, d).holds) {
                EXPECT_TRUE(verify_initial_state(s, d).holds);
                EXPECT_TRUE(verify_current_state(s, d).holds);
            }
        }
    }
}

TEST(Verify, WitnessesViolateTheDefinition) {
    for (const auto& s : random_corpus(150)) {
        for (const double d : candidate_deltas(s)) {
            for (const auto p : {Property::Initial, Property::Current, Property::Infinite}) {
                const auto v = verify(s, p, d);
                if (v.holds) {
                    continue;
                }
                ASSERT_TRUE(v.witness.has_value());
                EXPECT_TRUE(is_valid_run(s, v.witness->run));
                EXPECT_TRUE(run_violates(s, d, p, v.witness->run, v.witness->secret_index));
                if (!v.trivially_failed) {
                    EXPECT_GT(v.witness->run.length(), 0u);
                }
            }
        }
    }
}

TEST(Verify, TrivialFailureImpliesAllPropertiesFail) {
    for (const auto& s : random_corpus(150)) {
        for (const double d : candidate_deltas(s)) {
            if (check_nontriviality(s, d).passed) {
                continue;
            }
            for (const auto p : {Property::Initial, Property::Current, Property::Infinite}) {
                const auto v = verify(s, p, d);
                EXPECT_FALSE(v.holds);
                EXPECT_TRUE(v.trivially_failed);
            }
        }
    }
}

TEST(Verify, JsonShape) {
    const auto s = ex1();
    const auto j = to_json(s, verify_current_state(s, 0.05));
    EXPECT_EQ(j["property"], "current");
    EXPECT_EQ(j["holds"], false);
    EXPECT_EQ(j["trivially_failed"], true);
    EXPECT_EQ(j["witness"]["states"], Json::array({"B", "D", "B"}));
    EXPECT_EQ(j["witness"]["outputs"][1][0], 0.35);
    EXPECT_TRUE(j["stats"].contains("current_estimator_nodes"));
    EXPECT_TRUE(to_json(s, verify_current_state(s, 0.1))["witness"].is_null());
}

} // namespace
} // namespace opacity
