#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "lsdm/error.hpp"
#include "lsdm/evaluation.hpp"
#include "support.hpp"

namespace lsdm {
namespace {

// Full stable sort by descending score; equal scores keep ascending id.
std::vector<ItemId> oracle_order(std::span<const double> scores) {
  std::vector<ItemId> ids(scores.size());
  std::iota(ids.begin(), ids.end(), ItemId{1});
  std::stable_sort(ids.begin(), ids.end(),
                   [&](ItemId a, ItemId b) { return scores[a - 1] > scores[b - 1]; });
  return ids;
}

double oracle_ndcg(std::span<const double> scores, ItemId target, std::size_t k) {
  const auto order = oracle_order(scores);
  for (std::size_t c = 1; c <= std::min(k, order.size()); ++c)
    if (order[c - 1] == target) return 1.0 / std::log2(static_cast<double>(c) + 1.0);
  return 0.0;
}

TEST(Ranking, HandCases) {
  const double scores[] = {0.1, 0.9, 0.5, 0.9, 0.3};
  EXPECT_EQ(rank_items(scores, 3).items, (std::vector<ItemId>{2, 4, 3}));
  EXPECT_EQ(rank_of(scores, 4), 2u);
  EXPECT_EQ(rank_of(scores, 1), 5u);
  const RankedList all = rank_items(scores, 9);
  EXPECT_TRUE(all.clamped);
  EXPECT_EQ(all.items.size(), 5u);
  EXPECT_FALSE(rank_items(scores, 5).clamped);
  const double bad[] = {0.1, std::nan("")};
  EXPECT_THROW(rank_items(bad, 1), InvalidArgument);
  EXPECT_THROW(rank_of(scores, 6), InvalidArgument);
}

TEST(Ranking, MatchesBruteForceSortWithTies) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> coarse(0, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 20;
    std::vector<double> scores(n);
    for (double& s : scores) s = coarse(rng);
    const auto order = oracle_order(scores);
    for (std::size_t k = 1; k <= n; ++k) {
      const auto top = rank_items(scores, k).items;
      EXPECT_TRUE(std::equal(top.begin(), top.end(), order.begin()));
    }
    for (std::size_t c = 0; c < n; ++c) EXPECT_EQ(rank_of(scores, order[c]), c + 1);
  }
}

TEST(Metrics, HitAndNdcgExamples) {
  const RankedList top{{7, 3, 9, 1, 4}, false};
  EXPECT_EQ(hit_at_k(top, 9), 1);
  EXPECT_EQ(hit_at_k(top, 2), 0);
  EXPECT_DOUBLE_EQ(ndcg_at_k(top, 9), 0.5);
  EXPECT_DOUBLE_EQ(ndcg_at_k(top, 7), 1.0);
  EXPECT_DOUBLE_EQ(ndcg_at_k(top, 3), 1.0 / std::log2(3.0));
  EXPECT_EQ(ndcg_at_k(top, 2), 0.0);
}

TEST(Metrics, PropertiesOverRandomScores) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + trial % 19;
    std::vector<double> scores(n), warped(n);
    for (std::size_t j = 0; j < n; ++j) {
      scores[j] = std::round(u(rng) * 4) / 4;  // coarse grid forces ties
      warped[j] = 3.0 * std::exp(scores[j]) + 1.0;
    }
    const ItemId target = static_cast<ItemId>(1 + trial % n);
    for (std::size_t k = 1; k <= n; ++k) {
      const RankedList top = rank_items(scores, k);
      const double ndcg = ndcg_at_k(top, target);
      EXPECT_LE(ndcg, hit_at_k(top, target));
      EXPECT_DOUBLE_EQ(ndcg, oracle_ndcg(scores, target, k));
      EXPECT_EQ(top.items, rank_items(warped, k).items);
    }
    EXPECT_EQ(hit_at_k(rank_items(scores, n), target), 1);
  }
}

TEST(Pop, CountsTrainingPurchases) {
  std::mt19937_64 rng(2);
  const PurchaseLog log = testing::random_log(rng, 30, 15, 3, 12);
  std::map<ItemId, double> counts;
  for (const auto& e : log.events()) counts[e.item] += 1;
  const auto pop = pop_baseline(log);
  ASSERT_EQ(pop.size(), 15u);
  for (ItemId i = 1; i <= 15; ++i) EXPECT_EQ(pop[i - 1], counts[i]);
  EXPECT_THROW(pop_baseline(PurchaseLog({}, 1, 3)), InvalidArgument);
}

Split random_split(std::uint64_t seed, std::size_t users, std::size_t items) {
  std::mt19937_64 rng(seed);
  return split_leave_last(testing::random_log(rng, users, items, 3, 8));
}

TEST(Evaluate, PerfectScorerScoresOne) {
  const Split split = random_split(4, 40, 20);
  const Scorer perfect = [&](UserId u, std::span<const Event>) {
    std::vector<double> s(20, 0.0);
    s[split.test[u].item - 1] = 1.0;
    return s;
  };
  const MetricReport r = evaluate(perfect, split);
  EXPECT_EQ(r.users.size(), 40u);
  for (const auto& m : r.metrics) EXPECT_EQ(m.mean, 1.0) << m.name;
  EXPECT_EQ(r.metrics.size(), 4u);
  EXPECT_EQ(r.metrics[0].name, "Hit@5");
  EXPECT_EQ(r.metrics[3].name, "NDCG@10");
}

TEST(Evaluate, RandomScorerHitsAtChance) {
  const Split split = random_split(6, 1000, 100);
  const Scorer noise = [](UserId u, std::span<const Event>) {
    std::mt19937_64 rng(u * 7919 + 1);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    std::vector<double> s(100);
    for (double& v : s) v = d(rng);
    return s;
  };
  const MetricReport r = evaluate(noise, split);
  EXPECT_NEAR(r.at("Hit@5").mean, 0.05, 0.02);
  EXPECT_NEAR(r.at("Hit@10").mean, 0.10, 0.03);
}

TEST(Evaluate, HistoriesEndBeforeTheTarget) {
  const Split split = random_split(8, 25, 12);
  for (auto target : {EvalTarget::Validation, EvalTarget::Test}) {
    const Scorer check = [&, target](UserId u, std::span<const Event> h) {
      const auto train = split.train.user_events(u);
      const std::size_t expected = train.size() + (target == EvalTarget::Test ? 1 : 0);
      if (h.size() != expected) throw InvalidArgument("wrong history length");
      if (target == EvalTarget::Test && !(h.back() == split.validation[u]))
        throw InvalidArgument("validation event missing");
      return std::vector<double>(12, 0.0);
    };
    EXPECT_NO_THROW(evaluate(check, split, {.target = target}));
  }
}

TEST(Evaluate, UniformScoresRankByIdAndParallelMatchesSerial) {
  const Split split = random_split(9, 50, 10);
  const Scorer flat = [](UserId, std::span<const Event>) { return std::vector<double>(10, 0.0); };
  const MetricReport par = evaluate(flat, split, {.ks = {3, 50}});
  const MetricReport ser = evaluate(flat, split, {.ks = {3, 50}, .parallel = false});
  EXPECT_TRUE(par.k_clamped);
  EXPECT_EQ(par.at("Hit@50").mean, 1.0);
  for (std::size_t i = 0; i < par.users.size(); ++i) {
    const ItemId t = split.test[par.users[i]].item;
    EXPECT_EQ(par.at("Hit@3").per_user[i], t <= 3 ? 1.0 : 0.0);
  }
  for (std::size_t m = 0; m < par.metrics.size(); ++m) EXPECT_EQ(par.metrics[m].per_user, ser.metrics[m].per_user);
}

TEST(Evaluate, SkipsUsersWithoutHistoryAndPropagatesErrors) {
  Split split;
  split.train = PurchaseLog({{1, 1, 1}, {1, 2, 2}}, 2, 3);
  split.validation = {Event{}, Event{1, 3, 3}, Event{}};
  split.test = {Event{}, Event{1, 1, 4}, Event{}};
  const Scorer s = [](UserId, std::span<const Event>) { return std::vector<double>{0.1, 0.2, 0.3}; };
  const MetricReport r = evaluate(s, split, {.ks = {1}});
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.users, std::vector<UserId>{1});
  const Scorer short_scores = [](UserId, std::span<const Event>) { return std::vector<double>{1.0}; };
  EXPECT_THROW(evaluate(short_scores, split), ShapeError);
  std::ostringstream os;
  write_per_user(os, r);
  EXPECT_EQ(os.str(), "user\tHit@1\tNDCG@1\n1\t0\t0\n");
}

// Two-sided p-value for Student's t with 4 degrees of freedom, closed form.
double p_value_df4(double t) {
  const double q = 1.0 + t * t / 4.0;
  const double cdf = 0.5 + 0.375 * (t / std::sqrt(q)) * (1.0 - t * t / (12.0 * q));
  return 2.0 * (1.0 - cdf);
}

TEST(TTest, MatchesClosedForm) {
  const double a[] = {1, 2, 3, 4, 5}, b[] = {2, 2, 2, 2, 2};
  const TTestResult r = paired_t_test(a, b);
  EXPECT_EQ(r.df, 4u);
  EXPECT_NEAR(r.t, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(r.p_value, p_value_df4(std::sqrt(2.0)), 1e-10);
  EXPECT_NEAR(r.p_value, 0.2302, 1e-4);

  const TTestResult flipped = paired_t_test(b, a);
  EXPECT_NEAR(flipped.t, -std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(flipped.p_value, r.p_value, 1e-12);
}

TEST(TTest, DegenerateDifferences) {
  const double a[] = {0.5, 0.5, 1.0}, c[] = {1.5, 1.5, 2.0};
  const TTestResult same = paired_t_test(a, a);
  EXPECT_EQ(same.t, 0.0);
  EXPECT_EQ(same.p_value, 1.0);
  const TTestResult shifted = paired_t_test(c, a);
  EXPECT_TRUE(std::isinf(shifted.t) && shifted.t > 0);
  EXPECT_EQ(shifted.p_value, 0.0);
  const double one[] = {1.0};
  EXPECT_THROW(paired_t_test(one, one), InvalidArgument);
  EXPECT_THROW(paired_t_test(a, one), InvalidArgument);
}

}  // namespace
}  // namespace lsdm
