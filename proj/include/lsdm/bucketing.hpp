#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsdm/purchase_log.hpp"

namespace lsdm {

inline constexpr Timestamp kSecondsPerDay = 86400;
inline constexpr Timestamp kSecondsPerWeek = 7 * kSecondsPerDay;

/// Window used to group a purchase history into transactions.
struct TimeScale {
  enum class Kind { Item, Day, Week, NGram };

  Kind kind = Kind::Item;
  std::size_t n = 0;  // run length, NGram only

  static TimeScale item() { return {Kind::Item, 0}; }
  static TimeScale day() { return {Kind::Day, 0}; }
  static TimeScale week() { return {Kind::Week, 0}; }
  static TimeScale ngram(std::size_t n);

  /// "item", "day", "week" or "<n>gram".
  std::string name() const;
  static TimeScale parse(std::string_view text);

  friend bool operator==(const TimeScale&, const TimeScale&) = default;
};

/// Items bought within one window. `items` is ascending and duplicate-free;
/// `counts[k]` is how often items[k] was bought in the window and
/// `last_position[k]` the index (within the window) of its latest purchase.
struct Transaction {
  std::int64_t window = 0;
  std::vector<ItemId> items;
  std::vector<std::uint32_t> counts;
  std::vector<std::uint32_t> last_position;

  std::size_t size() const noexcept { return items.size(); }
  bool contains(ItemId item) const;

  /// At most `max_items` items, keeping the most recently bought, returned
  /// in ascending id order.
  std::vector<ItemId> canonical_items(std::size_t max_items) const;

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

struct TransactionSequence {
  UserId user = 0;
  TimeScale scale;
  std::vector<Transaction> transactions;

  friend bool operator==(const TransactionSequence&, const TransactionSequence&) = default;
};

/// Midnight (UTC) at or before the earliest timestamp of the log.
Timestamp default_epoch(const PurchaseLog& log);

/// Groups one user's time-sorted events into transactions. Day and Week use
/// windows floor((t - epoch) / length); empty windows are dropped. Item gives
/// one transaction per event; NGram(n) cuts consecutive runs of n events.
TransactionSequence bucket_by_scale(std::span<const Event> user_events, TimeScale scale,
                                    Timestamp epoch);

/// Text format, one transaction per line:
///   user<TAB>scale<TAB>window<TAB>item:count:last_position,...
void write_transactions(std::ostream& out, std::span<const TransactionSequence> sequences);
std::vector<TransactionSequence> read_transactions(std::istream& in);

}  // namespace lsdm
