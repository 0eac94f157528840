#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace lsdm {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;
using Timestamp = std::int64_t;  // seconds since epoch

/// Id 0 is reserved for padding; real ids start at 1.
inline constexpr ItemId kPaddingItem = 0;

struct Event {
  UserId user = 0;
  ItemId item = 0;
  Timestamp time = 0;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Time-ordered purchase events with dense ids 1..num_users / 1..num_items.
/// Events are kept sorted by (user, time, item).
class PurchaseLog {
 public:
  PurchaseLog() = default;

  /// Sorts `events` and validates ids against the declared universe sizes.
  PurchaseLog(std::vector<Event> events, std::size_t num_users, std::size_t num_items);

  const std::vector<Event>& events() const noexcept { return events_; }
  std::size_t num_users() const noexcept { return num_users_; }
  std::size_t num_items() const noexcept { return num_items_; }
  bool empty() const noexcept { return events_.empty(); }

  /// Events of one user, in time order. Empty for users without purchases.
  std::span<const Event> user_events(UserId user) const;

  Timestamp earliest_time() const;

 private:
  std::vector<Event> events_;
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::vector<std::size_t> user_offsets_;  // size num_users + 2
};

/// Reversible mapping between original ids (as text) and dense ids.
class IdMap {
 public:
  /// Dense ids are assigned in ascending order of the originals; integer
  /// originals compare numerically, others lexicographically.
  static IdMap build(std::vector<std::string> originals, bool numeric);

  std::uint32_t dense(const std::string& original) const;
  const std::string& original(std::uint32_t dense) const;
  std::size_t size() const noexcept { return originals_.size(); }

  /// One `original<TAB>dense` line per id, ascending dense id.
  void write(std::ostream& out) const;
  static IdMap read(std::istream& in);

 private:
  std::vector<std::string> originals_;  // index = dense id - 1
  std::unordered_map<std::string, std::uint32_t> lookup_;
};

enum class IdType { Integer, String };

/// Column layout of a delimited purchase file. Columns are 0-based.
struct LogSchema {
  char delimiter = ',';
  bool has_header = true;
  std::size_t user_column = 0;
  std::size_t item_column = 1;
  std::size_t time_column = 2;
  IdType id_type = IdType::Integer;
};

struct ParsedLog {
  PurchaseLog log;
  IdMap users;
  IdMap items;
};

/// Throws ParseError (with line number) on a malformed row and Error on an
/// input without any data rows.
ParsedLog parse_purchase_log(std::istream& in, const LogSchema& schema);

/// `user,item,timestamp` CSV with header, dense ids.
void write_purchase_log(std::ostream& out, const PurchaseLog& log);

}  // namespace lsdm
