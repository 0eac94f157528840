#pragma once

#include <span>

#include "lsdm/joint.hpp"
#include "lsdm/params.hpp"
#include "lsdm/purchase_log.hpp"
#include "lsdm/sequences.hpp"

namespace lsdm {

/// A trained multi-scale model together with the bucketing anchor it was
/// trained with.
struct LsdmModel {
  LsdmParams params;
  Timestamp epoch = 0;

  std::vector<TimeScale> scales() const;
  SequenceBuilder builder() const;

  /// Final-step prediction of every scale for `history` (time-sorted).
  PredictionMatrix scale_predictions(UserId user, std::span<const Event> history) const;

  /// Joined next-item scores; entry k belongs to item k+1.
  Tensor score(UserId user, std::span<const Event> history) const;
};

}  // namespace lsdm
