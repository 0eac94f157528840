#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "lsdm/error.hpp"
#include "lsdm/synthetic.hpp"

namespace lsdm {
namespace {

constexpr Timestamp kDay = 86400;

SyntheticSpec weekly_only() {
  SyntheticSpec s;
  s.num_users = 3;
  s.num_items = 5;
  s.horizon_days = 28;
  s.periodic_rules = {{2, 7, 0}};
  s.seed = 1;
  return s;
}

TEST(Synthetic, PeriodicRuleFiresOnSchedule) {
  const SyntheticSpec spec = weekly_only();
  const SyntheticLog out = generate_synthetic(spec);
  for (UserId u = 1; u <= 3; ++u) {
    std::vector<Timestamp> days;
    for (const auto& e : out.log.user_events(u)) {
      EXPECT_EQ(e.item, 2u);
      days.push_back((e.time - spec.start_time) / kDay);
    }
    EXPECT_EQ(days, (std::vector<Timestamp>{0, 7, 14, 21}));
  }
  for (const auto& a : out.annotations) EXPECT_EQ(a.source, EventSource::Periodic);
}

TEST(Synthetic, JitterStaysWithinBoundsAndHorizon) {
  SyntheticSpec spec = weekly_only();
  spec.num_users = 50;
  spec.periodic_rules = {{2, 7, 2}};
  const SyntheticLog out = generate_synthetic(spec);
  for (UserId u = 1; u <= 50; ++u) {
    const auto ev = out.log.user_events(u);
    ASSERT_EQ(ev.size(), 4u);
    for (std::size_t k = 0; k < 4; ++k) {
      const Timestamp day = (ev[k].time - spec.start_time) / kDay;
      EXPECT_GE(day, std::max<Timestamp>(0, 7 * static_cast<Timestamp>(k) - 2));
      EXPECT_LE(day, 7 * static_cast<Timestamp>(k) + 2);
    }
  }
}

TEST(Synthetic, CompanionFollowsTriggerAtTheGap) {
  for (int gap : {0, 1, 2}) {
    SyntheticSpec spec;
    spec.num_users = 20;
    spec.num_items = 10;
    spec.horizon_days = 30;
    spec.periodic_rules = {{1, 3, 0}, {4, 5, 0}};
    spec.copurchase_rules = {{1, 7, gap, 1.0}};
    spec.noise_rate = 0.5;
    spec.seed = 3;
    const SyntheticLog out = generate_synthetic(spec);
    const auto& ann = out.annotations;
    std::size_t companions = 0;
    for (std::size_t k = 0; k < ann.size(); ++k) {
      if (ann[k].source != EventSource::Copurchase) continue;
      ++companions;
      std::size_t back = static_cast<std::size_t>(std::max(gap, 1));
      // Near the end of a history the companion is appended right after.
      const bool last = k + 1 == ann.size() || ann[k + 1].event.user != ann[k].event.user;
      if (last && ann[k - 1].event.item == 1u) back = 1;
      ASSERT_GE(k, back);
      EXPECT_EQ(ann[k - back].event.item, 1u) << "gap " << gap;
      EXPECT_EQ(ann[k - back].event.user, ann[k].event.user);
    }
    std::size_t triggers = 0;
    for (const auto& a : ann) triggers += a.source == EventSource::Periodic && a.event.item == 1;
    EXPECT_EQ(companions, triggers);
  }
}

TEST(Synthetic, ZeroProbabilityCompanionNeverAppears) {
  SyntheticSpec spec = weekly_only();
  spec.copurchase_rules = {{2, 5, 1, 0.0}};
  const SyntheticLog out = generate_synthetic(spec);
  for (const auto& e : out.log.events()) EXPECT_NE(e.item, 5u);
}

TEST(Synthetic, NoiseAvoidsRuleItems) {
  SyntheticSpec spec = weekly_only();
  spec.num_users = 30;
  spec.noise_rate = 0.8;
  spec.copurchase_rules = {{2, 3, 1, 0.5}};
  std::size_t noise = 0;
  for (const auto& a : generate_synthetic(spec).annotations) {
    if (a.source != EventSource::Noise) continue;
    ++noise;
    EXPECT_NE(a.event.item, 2u);
    EXPECT_NE(a.event.item, 3u);
  }
  EXPECT_GT(noise, 0u);
}

TEST(Synthetic, DeterministicForFixedSeed) {
  SyntheticSpec spec = weekly_only();
  spec.noise_rate = 0.4;
  spec.random_phase = true;
  spec.periodic_rules.push_back({4, 3, 1});
  spec.rules_per_user = 1;
  const SyntheticLog a = generate_synthetic(spec);
  const SyntheticLog b = generate_synthetic(spec);
  EXPECT_EQ(a.log.events(), b.log.events());
  spec.seed = 2;
  EXPECT_NE(a.log.events(), generate_synthetic(spec).log.events());
}

TEST(Synthetic, RulesPerUserAssignsASubset) {
  SyntheticSpec spec;
  spec.num_users = 40;
  spec.num_items = 8;
  spec.horizon_days = 30;
  spec.periodic_rules = {{1, 2, 0}, {2, 3, 0}, {3, 4, 0}, {4, 5, 0}};
  spec.rules_per_user = 2;
  spec.seed = 9;
  const SyntheticLog out = generate_synthetic(spec);
  std::set<std::set<ItemId>> combos;
  for (UserId u = 1; u <= 40; ++u) {
    std::set<ItemId> items;
    for (const auto& e : out.log.user_events(u)) items.insert(e.item);
    EXPECT_EQ(items.size(), 2u);
    combos.insert(items);
  }
  EXPECT_GT(combos.size(), 1u);
}

TEST(Synthetic, RepurchaseRateFallsWithNoise) {
  double previous = 2.0;
  for (double noise : {0.0, 0.3, 0.6}) {
    SyntheticSpec spec;
    spec.num_users = 200;
    spec.num_items = 30;
    spec.horizon_days = 60;
    spec.periodic_rules = {{1, 3, 0}};
    spec.noise_rate = noise;
    spec.seed = 11;
    const double rate = measure_repurchase_rate(generate_synthetic(spec).log, TimeScale::day());
    if (noise == 0.0) {
      EXPECT_EQ(rate, 1.0);
    }
    EXPECT_LE(rate, previous);
    previous = rate;
  }
  EXPECT_LT(previous, 1.0);
}

TEST(Synthetic, RepurchaseRateHandCase) {
  // User 1 buys item 1 on two of three days, user 2 never repeats.
  const PurchaseLog log({{1, 1, 0}, {1, 1, kDay}, {1, 2, 2 * kDay}, {2, 1, 0}, {2, 2, kDay}, {2, 3, 2 * kDay}},
                        2, 3);
  EXPECT_EQ(measure_repurchase_rate(log, TimeScale::day()), 0.5);
}

TEST(Synthetic, ValidationNamesTheField) {
  auto message = [](SyntheticSpec s) {
    try {
      generate_synthetic(s);
    } catch (const InvalidArgument& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  SyntheticSpec s = weekly_only();
  s.noise_rate = 1.5;
  EXPECT_NE(message(s).find("noise_rate"), std::string::npos);
  s = weekly_only();
  s.periodic_rules = {{9, 7, 0}};
  EXPECT_NE(message(s).find("periodic_rules[0].item"), std::string::npos);
  s = weekly_only();
  s.copurchase_rules = {{1, 2, 1, -0.1}};
  EXPECT_NE(message(s).find("copurchase_rules[0].probability"), std::string::npos);
  s = weekly_only();
  s.periodic_rules[0].period_days = 0;
  EXPECT_NE(message(s).find("period_days"), std::string::npos);
  s = weekly_only();
  s.start_time += 1;
  EXPECT_NE(message(s).find("start_time"), std::string::npos);
}

TEST(Synthetic, HorizonTooShortIsRejected) {
  SyntheticSpec s = weekly_only();
  s.horizon_days = 10;  // two weekly purchases only
  try {
    generate_synthetic(s);
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("horizon too short"), std::string::npos);
  }
}

TEST(Synthetic, AnnotationsAlignWithEvents) {
  SyntheticSpec spec = weekly_only();
  spec.noise_rate = 0.3;
  spec.copurchase_rules = {{2, 4, 1, 0.7}};
  const SyntheticLog out = generate_synthetic(spec);
  ASSERT_EQ(out.annotations.size(), out.log.events().size());
  for (std::size_t k = 0; k < out.annotations.size(); ++k) EXPECT_EQ(out.annotations[k].event, out.log.events()[k]);
  std::ostringstream os;
  write_annotations(os, out.annotations);
  EXPECT_EQ(os.str().substr(0, 32), "user,item,timestamp,source,rule\n");
}

}  // namespace
}  // namespace lsdm
