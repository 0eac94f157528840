#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "lsdm/bucketing.hpp"
#include "lsdm/purchase_log.hpp"

namespace lsdm {

/// Long-time demand: `item` is bought every `period_days`, each occurrence
/// shifted by a uniform offset in [-jitter_days, jitter_days].
struct PeriodicRule {
  ItemId item = 1;
  int period_days = 7;
  int jitter_days = 0;
};

/// Short-time demand: after each purchase of `trigger`, with `probability`,
/// `companion` is bought `gap_events` events later (0 places it right after
/// the trigger in the same basket).
struct CopurchaseRule {
  ItemId trigger = 1;
  ItemId companion = 2;
  int gap_events = 1;
  double probability = 1.0;
};

struct SyntheticSpec {
  std::size_t num_users = 10;
  std::size_t num_items = 20;
  int horizon_days = 28;
  std::vector<PeriodicRule> periodic_rules;
  std::vector<CopurchaseRule> copurchase_rules;
  /// Per user per day, probability of one purchase of a uniformly drawn item
  /// that no rule mentions.
  double noise_rate = 0.0;
  std::uint64_t seed = 42;
  /// When > 0 each user adopts this many periodic rules, drawn at random;
  /// 0 means every user follows every rule.
  std::size_t rules_per_user = 0;
  /// Start each user's periodic schedule at a random day in [0, period).
  bool random_phase = false;
  /// Day 0 starts here (must be midnight UTC).
  Timestamp start_time = 978307200;  // 2001-01-01

  /// Throws InvalidArgument naming the offending field.
  void validate() const;
};

enum class EventSource : std::uint8_t { Periodic, Copurchase, Noise };

/// Ground truth for one generated event; `rule` indexes the rule list of its
/// source kind (unused for noise).
struct EventAnnotation {
  Event event;
  EventSource source = EventSource::Noise;
  std::size_t rule = 0;
};

struct SyntheticLog {
  PurchaseLog log;
  std::vector<EventAnnotation> annotations;  // same order as log.events()
};

/// Deterministic for a fixed spec. Throws InvalidArgument when some user
/// ends up with fewer than 3 events.
SyntheticLog generate_synthetic(const SyntheticSpec& spec);

/// CSV `user,item,timestamp,source,rule`.
void write_annotations(std::ostream& out, const std::vector<EventAnnotation>& annotations);

/// Fraction of users having at least one item that appears in at least half
/// of their transactions at `scale`.
double measure_repurchase_rate(const PurchaseLog& log, TimeScale scale);

}  // namespace lsdm
