#include "lsdm/purchase_log.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <string_view>
#include <tuple>

#include "lsdm/error.hpp"

namespace lsdm {

PurchaseLog::PurchaseLog(std::vector<Event> events, std::size_t num_users,
                         std::size_t num_items)
    : events_(std::move(events)), num_users_(num_users), num_items_(num_items) {
  for (const auto& e : events_) {
    if (e.user == 0 || e.user > num_users_) {
      throw InvalidArgument("user id " + std::to_string(e.user) + " outside [1, " +
                            std::to_string(num_users_) + "]");
    }
    if (e.item == 0 || e.item > num_items_) {
      throw InvalidArgument("item id " + std::to_string(e.item) + " outside [1, " +
                            std::to_string(num_items_) + "]");
    }
  }
  std::sort(events_.begin(), events_.end(), [](const Event& a, const Event& b) {
    return std::tie(a.user, a.time, a.item) < std::tie(b.user, b.time, b.item);
  });
  user_offsets_.assign(num_users_ + 2, 0);
  for (const auto& e : events_) ++user_offsets_[e.user + 1];
  for (std::size_t u = 1; u < user_offsets_.size(); ++u) user_offsets_[u] += user_offsets_[u - 1];
}

std::span<const Event> PurchaseLog::user_events(UserId user) const {
  if (user == 0 || user > num_users_) return {};
  return std::span<const Event>(events_).subspan(user_offsets_[user],
                                                 user_offsets_[user + 1] - user_offsets_[user]);
}

Timestamp PurchaseLog::earliest_time() const {
  if (events_.empty()) throw Error("earliest_time of an empty log");
  return std::min_element(events_.begin(), events_.end(),
                          [](const Event& a, const Event& b) { return a.time < b.time; })
      ->time;
}

namespace {

bool parse_int(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(delim, start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool numeric_less(const std::string& a, const std::string& b) {
  std::int64_t x = 0, y = 0;
  parse_int(a, x);
  parse_int(b, y);
  return x < y;
}

}  // namespace

IdMap IdMap::build(std::vector<std::string> originals, bool numeric) {
  if (numeric) {
    std::sort(originals.begin(), originals.end(), numeric_less);
    originals.erase(std::unique(originals.begin(), originals.end(),
                                [](const std::string& a, const std::string& b) {
                                  return !numeric_less(a, b) && !numeric_less(b, a);
                                }),
                    originals.end());
  } else {
    std::sort(originals.begin(), originals.end());
    originals.erase(std::unique(originals.begin(), originals.end()), originals.end());
  }
  IdMap map;
  map.originals_ = std::move(originals);
  for (std::size_t i = 0; i < map.originals_.size(); ++i) {
    map.lookup_.emplace(map.originals_[i], static_cast<std::uint32_t>(i + 1));
  }
  return map;
}

std::uint32_t IdMap::dense(const std::string& original) const {
  auto it = lookup_.find(original);
  if (it == lookup_.end()) throw InvalidArgument("unknown original id '" + original + "'");
  return it->second;
}

const std::string& IdMap::original(std::uint32_t dense) const {
  if (dense == 0 || dense > originals_.size()) {
    throw InvalidArgument("dense id " + std::to_string(dense) + " not in mapping");
  }
  return originals_[dense - 1];
}

void IdMap::write(std::ostream& out) const {
  for (std::size_t i = 0; i < originals_.size(); ++i) out << originals_[i] << '\t' << i + 1 << '\n';
}

IdMap IdMap::read(std::istream& in) {
  std::vector<std::pair<std::uint32_t, std::string>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split(line, '\t');
    std::int64_t dense = 0;
    if (fields.size() != 2 || !parse_int(fields[1], dense) || dense < 1) {
      throw ParseError(lineno, "expected original<TAB>dense_id");
    }
    rows.emplace_back(static_cast<std::uint32_t>(dense), std::string(fields[0]));
  }
  std::sort(rows.begin(), rows.end());
  IdMap map;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != i + 1) throw Error("id mapping is not dense at id " + std::to_string(i + 1));
    map.originals_.push_back(rows[i].second);
    map.lookup_.emplace(rows[i].second, rows[i].first);
  }
  return map;
}

ParsedLog parse_purchase_log(std::istream& in, const LogSchema& schema) {
  struct Row {
    std::string user, item;
    Timestamp time;
  };
  std::vector<Row> rows;
  const std::size_t needed =
      std::max({schema.user_column, schema.item_column, schema.time_column}) + 1;
  const bool numeric = schema.id_type == IdType::Integer;

  std::string line;
  std::size_t lineno = 0;
  bool header_pending = schema.has_header;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    const auto fields = split(line, schema.delimiter);
    if (fields.size() < needed) {
      throw ParseError(lineno, "expected at least " + std::to_string(needed) + " fields, got " +
                                   std::to_string(fields.size()));
    }
    std::int64_t scratch = 0;
    const auto user = fields[schema.user_column];
    const auto item = fields[schema.item_column];
    if (user.empty()) throw ParseError(lineno, "empty user field");
    if (item.empty()) throw ParseError(lineno, "empty item field");
    if (numeric && !parse_int(user, scratch)) {
      throw ParseError(lineno, "user field '" + std::string(user) + "' is not an integer");
    }
    if (numeric && !parse_int(item, scratch)) {
      throw ParseError(lineno, "item field '" + std::string(item) + "' is not an integer");
    }
    std::int64_t time = 0;
    if (!parse_int(fields[schema.time_column], time)) {
      throw ParseError(lineno, "timestamp field '" + std::string(fields[schema.time_column]) +
                                   "' is not an integer");
    }
    if (numeric) {
      // Canonical text so "007" and "7" name the same id.
      std::int64_t u = 0, i = 0;
      parse_int(user, u);
      parse_int(item, i);
      rows.push_back(Row{std::to_string(u), std::to_string(i), time});
    } else {
      rows.push_back(Row{std::string(user), std::string(item), time});
    }
  }
  if (rows.empty()) throw Error("purchase log is empty");

  std::vector<std::string> users, items;
  users.reserve(rows.size());
  items.reserve(rows.size());
  for (const auto& r : rows) {
    users.push_back(r.user);
    items.push_back(r.item);
  }
  ParsedLog out;
  out.users = IdMap::build(std::move(users), numeric);
  out.items = IdMap::build(std::move(items), numeric);
  std::vector<Event> events;
  events.reserve(rows.size());
  for (const auto& r : rows) {
    events.push_back(Event{out.users.dense(r.user), out.items.dense(r.item), r.time});
  }
  out.log = PurchaseLog(std::move(events), out.users.size(), out.items.size());
  return out;
}

void write_purchase_log(std::ostream& out, const PurchaseLog& log) {
  out << "user,item,timestamp\n";
  for (const auto& e : log.events()) out << e.user << ',' << e.item << ',' << e.time << '\n';
}

}  // namespace lsdm
