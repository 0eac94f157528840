#pragma once

#include <vector>

#include "lsdm/purchase_log.hpp"

namespace lsdm {

/// Leave-last-out split. `validation` and `test` are indexed by user id
/// (entry 0 unused): the penultimate and last event of each user.
struct Split {
  PurchaseLog train;
  std::vector<Event> validation;
  std::vector<Event> test;
};

/// Throws InvalidArgument listing every user with fewer than 3 events.
Split split_leave_last(const PurchaseLog& log);

}  // namespace lsdm
