#include "lsdm/sequences.hpp"

#include <algorithm>
#include <cmath>

#include "lsdm/error.hpp"

namespace lsdm {

std::size_t choose_max_items(const PurchaseLog& log, TimeScale scale, Timestamp epoch,
                             double percentile, std::size_t cap) {
  std::vector<std::size_t> sizes;
  for (UserId u = 1; u <= log.num_users(); ++u) {
    const auto events = log.user_events(u);
    if (events.empty()) continue;
    for (const auto& t : bucket_by_scale(events, scale, epoch).transactions) sizes.push_back(t.size());
  }
  if (sizes.empty()) return 1;
  std::sort(sizes.begin(), sizes.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil(std::clamp(percentile, 0.0, 1.0) * static_cast<double>(sizes.size())));
  const std::size_t value = sizes[std::clamp<std::size_t>(rank, 1, sizes.size()) - 1];
  return std::clamp<std::size_t>(value, 1, std::max<std::size_t>(cap, 1));
}

SequenceBuilder::SequenceBuilder(std::vector<TimeScale> scales, std::vector<std::size_t> max_items,
                                 Timestamp epoch)
    : scales_(std::move(scales)), max_items_(std::move(max_items)), epoch_(epoch) {
  if (scales_.size() != max_items_.size()) {
    throw InvalidArgument("SequenceBuilder: one max_items value per scale required");
  }
}

UserExample SequenceBuilder::build(UserId user, std::span<const Event> history,
                                   ItemId target) const {
  UserExample ex;
  ex.user = user;
  ex.target = target;
  for (std::size_t c = 0; c < scales_.size(); ++c) {
    const auto seq = bucket_by_scale(history, scales_[c], epoch_);
    ScaleSequence s;
    const std::size_t n = seq.transactions.size();
    for (std::size_t j = 0; j < n; ++j) {
      s.inputs.push_back(seq.transactions[j].canonical_items(max_items_[c]));
      if (j + 1 < n) {
        s.next_items.push_back(seq.transactions[j + 1].items);
      } else {
        s.next_items.push_back({target});
      }
    }
    ex.scales.push_back(std::move(s));
  }
  return ex;
}

}  // namespace lsdm
