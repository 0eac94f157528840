#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lsdm/bucketing.hpp"
#include "lsdm/purchase_log.hpp"

namespace lsdm {

/// One scale's view of a user history, ready for the model. inputs[j] is the
/// canonical (truncated, ascending) item list of transaction j; next_items[j]
/// is what step j is supervised with: the full item set of transaction j+1,
/// and for the last step the held-out target alone.
struct ScaleSequence {
  std::vector<std::vector<ItemId>> inputs;
  std::vector<std::vector<ItemId>> next_items;
};

/// A user history bucketed at every scale, aligned so that each scale's last
/// step predicts `target`.
struct UserExample {
  UserId user = 0;
  std::vector<ScaleSequence> scales;
  ItemId target = 0;
};

/// Transaction-size cutoff for a scale: the `percentile` (nearest rank) of
/// transaction sizes over all users of `log`, capped at `cap`, at least 1.
std::size_t choose_max_items(const PurchaseLog& log, TimeScale scale, Timestamp epoch,
                             double percentile = 0.95, std::size_t cap = 20);

class SequenceBuilder {
 public:
  SequenceBuilder(std::vector<TimeScale> scales, std::vector<std::size_t> max_items,
                  Timestamp epoch);

  /// `history` must be non-empty and time-sorted.
  UserExample build(UserId user, std::span<const Event> history, ItemId target) const;

  const std::vector<TimeScale>& scales() const noexcept { return scales_; }
  Timestamp epoch() const noexcept { return epoch_; }

 private:
  std::vector<TimeScale> scales_;
  std::vector<std::size_t> max_items_;
  Timestamp epoch_;
};

}  // namespace lsdm
