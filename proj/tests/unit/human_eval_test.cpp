#include <gtest/gtest.h>

#include <set>

#include "distill/error.hpp"
#include "distill/human_eval.hpp"
#include "test_support.hpp"

using namespace distill;
using P = Preference;

namespace {

ShownChoice swap(ShownChoice c) {
    if (c == ShownChoice::a) return ShownChoice::b;
    if (c == ShownChoice::b) return ShownChoice::a;
    return c;
}

distill::testing::Sheet target_sheet() {
    const auto counts = distill::testing::search_sheet_counts(100, 14, 44, 42, 7, 56, 37);
    EXPECT_TRUE(counts);
    return distill::testing::build_sheet(*counts);
}

}  // namespace

TEST(Judge, MajorityAndLevels) {
    auto o = judge_example("x", {P::model_a, P::model_a, P::model_b});
    EXPECT_EQ(o.outcome, P::model_a);
    EXPECT_EQ(o.level, 1);
    o = judge_example("x", {P::model_a, P::model_b, P::tie});
    EXPECT_EQ(o.outcome, P::tie);
    EXPECT_EQ(o.level, 0);
    o = judge_example("x", {P::tie, P::model_b, P::tie});
    EXPECT_EQ(o.outcome, P::tie);
    EXPECT_EQ(o.level, 1);
    o = judge_example("x", {P::model_b, P::model_b, P::model_b});
    EXPECT_EQ(o.outcome, P::model_b);
    EXPECT_EQ(o.level, 2);
}

// Exhaustive over all 27 vote triples: level and outcome follow from the raw counts.
TEST(Judge, AllTriples) {
    const std::array<P, 3> opts{P::model_a, P::tie, P::model_b};
    for (auto x : opts)
        for (auto y : opts)
            for (auto z : opts) {
                const auto o = judge_example("x", {x, y, z});
                const std::set<P> distinct{x, y, z};
                EXPECT_EQ(o.level, 3 - static_cast<int>(distinct.size()));
                if (distinct.size() == 3) EXPECT_EQ(o.outcome, P::tie);
                else EXPECT_EQ(static_cast<int>((x == o.outcome) + (y == o.outcome) + (z == o.outcome)) >= 2, true);
            }
}

TEST(Aggregate, DerandomizesSides) {
    // model A was shown as (b); two annotators chose (b)
    const std::vector<PreferenceVote> votes{{"e1", "1", ShownChoice::b}, {"e1", "2", ShownChoice::b}, {"e1", "3", ShownChoice::a}};
    const auto r = aggregate_preferences(votes, {{"e1", ShownChoice::b}});
    ASSERT_EQ(r.outcomes.size(), 1u);
    EXPECT_EQ(r.outcomes[0].outcome, P::model_a);
    EXPECT_DOUBLE_EQ(r.pct_a, 100.0);
}

TEST(Aggregate, ReproducesTargetMarginals) {
    const auto sheet = target_sheet();
    ASSERT_EQ(sheet.votes.size(), 300u);
    const auto r = aggregate_preferences(sheet.votes, sheet.key);
    EXPECT_EQ(r.n_examples, 100u);
    EXPECT_DOUBLE_EQ(r.pct_a, 14.0);
    EXPECT_DOUBLE_EQ(r.pct_tie, 44.0);
    EXPECT_DOUBLE_EQ(r.pct_b, 42.0);
    EXPECT_DOUBLE_EQ(r.level_pct[0], 7.0);
    EXPECT_DOUBLE_EQ(r.level_pct[1], 56.0);
    EXPECT_DOUBLE_EQ(r.level_pct[2], 37.0);
    EXPECT_EQ(r.level_counts[0] + r.level_counts[1] + r.level_counts[2], r.n_examples);
    EXPECT_NEAR(r.pct_a + r.pct_tie + r.pct_b, 100.0, 1e-9);
}

TEST(Aggregate, SideSwapSymmetry) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto counts = distill::testing::search_sheet_counts(100, 14, 44, 42, 7, 56, 37);
        auto sheet = distill::testing::build_sheet(*counts, seed);
        const auto r = aggregate_preferences(sheet.votes, sheet.key);
        for (auto& v : sheet.votes) v.choice = swap(v.choice);
        for (auto& [id, side] : sheet.key) side = swap(side);
        const auto s = aggregate_preferences(sheet.votes, sheet.key);
        EXPECT_DOUBLE_EQ(s.pct_a, r.pct_a);
        EXPECT_DOUBLE_EQ(s.pct_b, r.pct_b);
        EXPECT_EQ(s.level_counts, r.level_counts);

        // swapping only the votes flips which model won
        for (auto& [id, side] : sheet.key) side = swap(side);
        const auto flipped = aggregate_preferences(sheet.votes, sheet.key);
        EXPECT_DOUBLE_EQ(flipped.pct_a, r.pct_b);
        EXPECT_DOUBLE_EQ(flipped.pct_b, r.pct_a);
        EXPECT_EQ(flipped.level_counts, r.level_counts);
    }
}

TEST(Aggregate, Errors) {
    std::vector<PreferenceVote> votes{{"e1", "1", ShownChoice::a}, {"e1", "2", ShownChoice::a}};
    try {
        aggregate_preferences(votes, {{"e1", ShownChoice::a}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), errc::incomplete_sheet);
        EXPECT_EQ(e.details().at("example_id"), "e1");
    }
    votes.push_back({"e1", "3", ShownChoice::tie});
    try {
        aggregate_preferences(votes, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), errc::unknown_example);
    }
    try {
        aggregate_preferences(votes, {{"e1", ShownChoice::a}, {"e2", ShownChoice::b}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), errc::incomplete_sheet);
        EXPECT_EQ(e.details().at("example_id"), "e2");
    }
    EXPECT_EQ(aggregate_preferences({}, {}).n_examples, 0u);
}

TEST(Csv, RoundTripAndErrors) {
    const auto sheet = target_sheet();
    const auto csv = votes_to_csv(sheet.votes);
    EXPECT_EQ(csv.rfind("example_id,annotator_id,choice\n", 0), 0u);
    const auto back = parse_votes_csv(csv);
    ASSERT_EQ(back.size(), sheet.votes.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].example_id, sheet.votes[i].example_id);
        EXPECT_EQ(back[i].choice, sheet.votes[i].choice);
    }
    EXPECT_EQ(parse_votes_csv("e1, 1, TIE\r\n")[0].choice, ShownChoice::tie);
    EXPECT_THROW(parse_votes_csv("e1,1\n"), Error);
    EXPECT_THROW(parse_votes_csv("e1,1,maybe\n"), Error);
    EXPECT_EQ(shuffle_key_from_json(to_json(sheet.key)), sheet.key);
}

// The sheet shipped under fixtures/ aggregates to the same report.
TEST(Csv, ShippedFixture) {
    const auto dir = distill::testing::source_dir() / "fixtures" / "human_eval";
    const auto votes = load_votes_csv(dir / "votes.csv");
    const auto key = shuffle_key_from_json(nlohmann::json::parse(read_file(dir / "shuffle_key.json")));
    const auto r = aggregate_preferences(votes, key);
    EXPECT_DOUBLE_EQ(r.pct_a, 14.0);
    EXPECT_DOUBLE_EQ(r.pct_tie, 44.0);
    EXPECT_DOUBLE_EQ(r.pct_b, 42.0);
    EXPECT_DOUBLE_EQ(r.level_pct[0], 7.0);
    EXPECT_DOUBLE_EQ(r.level_pct[1], 56.0);
    EXPECT_DOUBLE_EQ(r.level_pct[2], 37.0);
}
