#include <gtest/gtest.h>

#include <algorithm>

#include "slaterank/ranker.hpp"

using namespace slaterank;

namespace {

CandidateSet make_set(const std::vector<Vec>& features, std::size_t z = 2) {
  CandidateSet c;
  for (std::size_t i = 0; i < features.size(); ++i) {
    Candidate w;
    w.widget_id = "w" + std::to_string(i);
    w.context.widget_id = w.widget_id;
    w.context.x.assign(z, 0.0);
    w.context.x[i % z] = 1.0;
    w.features = features[i];
    c.widgets.push_back(std::move(w));
  }
  return c;
}

CandidateSet random_set(Rng& rng, std::size_t n, std::size_t z) {
  CandidateSet c;
  for (std::size_t i = 0; i < n; ++i) {
    Candidate w;
    w.widget_id = "w" + std::to_string(i);
    w.context.widget_id = w.widget_id;
    w.context.x.resize(z);
    for (double& v : w.context.x) v = standard_normal(rng);
    w.features.resize(3);
    for (double& v : w.features) v = standard_normal(rng);
    c.widgets.push_back(std::move(w));
  }
  return c;
}

}  // namespace

TEST(Rank, Singleton) {
  const auto cand = make_set({{1, 0}});
  for (double theta : {0.0, 0.5, 1.0}) {
    const auto s = rank_scored(cand, Vec{0.2}, theta, 3);
    EXPECT_EQ(s.order, (std::vector<std::string>{"w0"}));
  }
}

TEST(Rank, ThetaOneIsScoreOrder) {
  const auto cand = make_set({{1, 0}, {0, 1}, {1, 1}});
  const auto s = rank_scored(cand, Vec{0.9, 0.1, 0.5}, 1.0, 2);
  EXPECT_EQ(s.order, (std::vector<std::string>{"w0", "w2", "w1"}));
  EXPECT_EQ(s.dpp_prefix_len, 0u);
  EXPECT_EQ(s.scores, (Vec{0.9, 0.5, 0.1}));
}

TEST(Rank, NearDuplicateDisplaced) {
  const auto cand = make_set({{1, 0}, {1, 0}, {0, 1}});
  const auto s = rank_scored(cand, Vec{0.9, 0.8, 0.3}, 0.5, 2);
  ASSERT_EQ(s.dpp_prefix_len, 2u);
  EXPECT_EQ(s.indices[0], 0u);
  EXPECT_EQ(s.indices[1], 2u);
  EXPECT_EQ(s.order[2], "w1");
}

TEST(Rank, RemainderTiesByWidgetId) {
  const auto cand = make_set({{1, 0}, {0, 1}, {1, 1}, {2, 1}});
  const auto s = rank_scored(cand, Vec{0.5, 0.5, 0.5, 0.9}, 1.0, 4);
  EXPECT_EQ(s.order, (std::vector<std::string>{"w3", "w0", "w1", "w2"}));
}

TEST(Rank, PrefixMatchesGreedyMapAndRemainderSorted) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto cand = random_set(rng, 12, 4);
    Vec scores(12);
    for (double& v : scores) v = standard_normal(rng);
    const double theta = 0.95 * uniform01(rng);
    const auto s = rank_scored(cand, scores, theta, 5);

    std::vector<Vec> f;
    std::vector<std::string> ids;
    for (const auto& w : cand.widgets) {
      f.push_back(w.features);
      ids.push_back(w.widget_id);
    }
    const auto sel = greedy_map(build_kernel(scores, similarity_from_features(f, ids), theta), 5);
    ASSERT_EQ(s.dpp_prefix_len, sel.order.size());
    EXPECT_TRUE(std::equal(sel.order.begin(), sel.order.end(), s.indices.begin()));
    EXPECT_TRUE(std::is_sorted(s.scores.begin() + long(s.dpp_prefix_len), s.scores.end(),
                               std::greater<>()));
  }
}

TEST(Rank, AlwaysPermutation) {
  Rng rng(19);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + std::uniform_int_distribution<std::size_t>(0, 20)(rng);
    const auto cand = random_set(rng, n, 3);
    Vec scores(n);
    for (double& v : scores) v = uniform01(rng) < 0.2 ? 0.5 : standard_normal(rng);
    const std::size_t slots = 1 + std::uniform_int_distribution<std::size_t>(0, 12)(rng);
    const double theta = std::uniform_int_distribution<int>(0, 10)(rng) / 10.0;
    const auto s = rank_scored(cand, scores, theta, slots);
    EXPECT_TRUE(is_permutation_of(s, cand));
    EXPECT_LE(s.dpp_prefix_len, std::min(slots, n));
  }
}

TEST(Rank, IdempotentAndDeterministic) {
  Rng rng(21);
  const auto cand = random_set(rng, 15, 4);
  const auto state = BanditState::fresh(4, 0.5, 1.0);
  for (auto kind : {BanditKind::ucb, BanditKind::ts}) {
    const auto a = rank_round(state, cand, kind, 0.6, 10, 77);
    const auto b = rank_round(state, cand, kind, 0.6, 10, 77);
    EXPECT_EQ(a.order, b.order);
    EXPECT_EQ(a.dpp_prefix_len, b.dpp_prefix_len);
  }
}

TEST(Rank, Errors) {
  const auto cand = make_set({{1, 0}, {0, 1}});
  EXPECT_THROW(rank_scored(cand, Vec{1}, 0.5, 2), DimensionMismatch);
  EXPECT_THROW(rank_scored(cand, Vec{1, 2}, 1.5, 2), ThetaOutOfRange);
  EXPECT_THROW(rank_scored(cand, Vec{1, 2}, 0.5, 0), OutOfRange);
  EXPECT_THROW(rank_scored(CandidateSet{}, Vec{}, 0.5, 2), DimensionMismatch);
  EXPECT_THROW(rank_round(BanditState::fresh(3, 1, 1), cand, BanditKind::ucb, 0.5, 2, 0),
               DimensionMismatch);
}

TEST(IsPermutation, DetectsDropsAndDuplicates) {
  const auto cand = make_set({{1, 0}, {0, 1}, {1, 1}});
  RankedSlate s;
  s.order = {"w0", "w1"};
  EXPECT_FALSE(is_permutation_of(s, cand));
  s.order = {"w0", "w1", "w1"};
  EXPECT_FALSE(is_permutation_of(s, cand));
  s.order = {"w2", "w0", "w1"};
  EXPECT_TRUE(is_permutation_of(s, cand));
}

TEST(Feedback, ClickAtSecondOfThree) {
  const auto cand = make_set({{1, 0}, {0, 1}, {1, 1}, {2, 1}});
  const auto slate = rank_scored(cand, Vec{0.4, 0.3, 0.2, 0.1}, 1.0, 4);
  const auto obs = observe_impressions(slate, 3, {"w1"});
  const auto batch = collect_feedback(cand, slate, obs);
  ASSERT_EQ(batch.size(), 3u);
  EXPECT_EQ(batch.records[0].reward, 0.0);
  EXPECT_EQ(batch.records[1].reward, 1.0);
  EXPECT_EQ(batch.records[2].reward, 0.0);
  EXPECT_EQ(batch.records[1].action, "w1");
  EXPECT_EQ(batch.records[1].context.x, cand.widgets[1].context.x);
}

TEST(Feedback, EmptyAndZeroDepth) {
  const auto cand = make_set({{1, 0}, {0, 1}});
  const auto slate = rank_scored(cand, Vec{0.4, 0.3}, 1.0, 2);
  EXPECT_TRUE(collect_feedback(cand, slate, {}).empty());
  EXPECT_TRUE(collect_feedback(cand, slate, observe_impressions(slate, 0, {})).empty());
  EXPECT_EQ(observe_impressions(slate, 9, {}).size(), 2u);
}

TEST(Feedback, UnknownWidget) {
  const auto cand = make_set({{1, 0}, {0, 1}});
  const auto slate = rank_scored(cand, Vec{0.4, 0.3}, 1.0, 2);
  const std::vector<Observation> obs{{"nope", 1.0}};
  EXPECT_THROW(collect_feedback(cand, slate, obs), UnknownWidget);
}

TEST(Policies, BanditPolicyUpdatesState) {
  BanditPolicy p(BanditKind::ucb, BanditState::fresh(2, 0.1, 1.0));
  EXPECT_EQ(p.kind(), PolicyKind::ucb);
  const auto cand = make_set({{1, 0}, {0, 1}});
  InteractionBatch b;
  b.records.push_back({cand.widgets[0].context, "w0", 1.0});
  p.update(b);
  EXPECT_EQ(p.state().round(), 1);
  const auto s = p.score(cand, 0);
  EXPECT_GT(s[0], 0.0);
}

TEST(Policies, RandomIsSeeded) {
  RandomPolicy p;
  const auto cand = make_set({{1, 0}, {0, 1}, {1, 1}});
  EXPECT_EQ(p.score(cand, 5), p.score(cand, 5));
  EXPECT_NE(p.score(cand, 5), p.score(cand, 6));
}

TEST(Policies, PopularityRanksByObservedCtr) {
  PopularityPolicy p;
  const auto cand = make_set({{1, 0}, {0, 1}, {1, 1}});
  InteractionBatch b;
  for (int i = 0; i < 10; ++i) {
    b.records.push_back({cand.widgets[0].context, "w0", i < 2 ? 1.0 : 0.0});
    b.records.push_back({cand.widgets[1].context, "w1", i < 6 ? 1.0 : 0.0});
  }
  p.update(b);
  const auto s = p.score(cand, 0);
  EXPECT_GT(s[1], s[0]);
  // Unseen widget gets the global CTR.
  EXPECT_NEAR(s[2], 8.0 / 20.0, 1e-12);
}
