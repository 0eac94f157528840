#include "lsdm/split.hpp"

#include <string>

#include "lsdm/error.hpp"

namespace lsdm {

Split split_leave_last(const PurchaseLog& log) {
  std::vector<UserId> short_users;
  for (UserId u = 1; u <= log.num_users(); ++u) {
    if (log.user_events(u).size() < 3) short_users.push_back(u);
  }
  if (!short_users.empty()) {
    std::string ids;
    for (std::size_t k = 0; k < short_users.size() && k < 20; ++k) {
      if (k) ids += ", ";
      ids += std::to_string(short_users[k]);
    }
    if (short_users.size() > 20) ids += ", ...";
    throw InvalidArgument("users with fewer than 3 events cannot be split: " + ids);
  }

  Split split;
  split.validation.resize(log.num_users() + 1);
  split.test.resize(log.num_users() + 1);
  std::vector<Event> train;
  train.reserve(log.events().size() - 2 * log.num_users());
  for (UserId u = 1; u <= log.num_users(); ++u) {
    const auto events = log.user_events(u);
    const std::size_t n = events.size();
    train.insert(train.end(), events.begin(), events.end() - 2);
    split.validation[u] = events[n - 2];
    split.test[u] = events[n - 1];
  }
  split.train = PurchaseLog(std::move(train), log.num_users(), log.num_items());
  return split;
}

}  // namespace lsdm
