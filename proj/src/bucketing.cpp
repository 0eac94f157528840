#include "lsdm/bucketing.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "lsdm/error.hpp"

namespace lsdm {

TimeScale TimeScale::ngram(std::size_t n) {
  if (n < 2) throw InvalidArgument("n-gram scale needs n >= 2, got " + std::to_string(n));
  return {Kind::NGram, n};
}

std::string TimeScale::name() const {
  switch (kind) {
    case Kind::Item: return "item";
    case Kind::Day: return "day";
    case Kind::Week: return "week";
    case Kind::NGram: return std::to_string(n) + "gram";
  }
  return "?";
}

TimeScale TimeScale::parse(std::string_view text) {
  if (text == "item") return item();
  if (text == "day" || text == "daily") return day();
  if (text == "week" || text == "weekly") return week();
  for (std::string_view suffix : {"gram", "-gram"}) {
    if (text.size() > suffix.size() && text.ends_with(suffix)) {
      std::string_view digits = text.substr(0, text.size() - suffix.size());
      std::size_t n = 0;
      auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
      if (ec == std::errc() && ptr == digits.data() + digits.size()) return ngram(n);
    }
  }
  throw InvalidArgument("unknown time scale '" + std::string(text) + "'");
}

bool Transaction::contains(ItemId item) const {
  return std::binary_search(items.begin(), items.end(), item);
}

std::vector<ItemId> Transaction::canonical_items(std::size_t max_items) const {
  if (items.size() <= max_items) return items;
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [this](std::size_t a, std::size_t b) {
    return last_position[a] > last_position[b];
  });
  std::vector<ItemId> kept;
  kept.reserve(max_items);
  for (std::size_t k = 0; k < max_items; ++k) kept.push_back(items[order[k]]);
  std::sort(kept.begin(), kept.end());
  return kept;
}

Timestamp default_epoch(const PurchaseLog& log) {
  const Timestamp t = log.earliest_time();
  Timestamp day = t / kSecondsPerDay;
  if (t % kSecondsPerDay < 0) --day;
  return day * kSecondsPerDay;
}

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

Transaction make_transaction(std::int64_t window, std::span<const Event> events) {
  std::map<ItemId, std::pair<std::uint32_t, std::uint32_t>> seen;  // item -> (count, last)
  for (std::size_t k = 0; k < events.size(); ++k) {
    auto& slot = seen[events[k].item];
    ++slot.first;
    slot.second = static_cast<std::uint32_t>(k);
  }
  Transaction t;
  t.window = window;
  for (const auto& [item, cl] : seen) {
    t.items.push_back(item);
    t.counts.push_back(cl.first);
    t.last_position.push_back(cl.second);
  }
  return t;
}

}  // namespace

TransactionSequence bucket_by_scale(std::span<const Event> user_events, TimeScale scale,
                                    Timestamp epoch) {
  if (user_events.empty()) throw InvalidArgument("bucket_by_scale: no events");
  for (std::size_t k = 1; k < user_events.size(); ++k) {
    if (user_events[k].time < user_events[k - 1].time) {
      throw InvalidArgument("bucket_by_scale: events not sorted by time at index " +
                            std::to_string(k));
    }
    if (user_events[k].user != user_events[0].user) {
      throw InvalidArgument("bucket_by_scale: events from more than one user");
    }
  }
  TransactionSequence seq;
  seq.user = user_events.front().user;
  seq.scale = scale;

  auto window_of = [&](std::size_t k) -> std::int64_t {
    switch (scale.kind) {
      case TimeScale::Kind::Item: return static_cast<std::int64_t>(k);
      case TimeScale::Kind::Day: return floor_div(user_events[k].time - epoch, kSecondsPerDay);
      case TimeScale::Kind::Week: return floor_div(user_events[k].time - epoch, kSecondsPerWeek);
      case TimeScale::Kind::NGram: return static_cast<std::int64_t>(k / scale.n);
    }
    return 0;
  };

  std::size_t begin = 0;
  while (begin < user_events.size()) {
    const std::int64_t w = window_of(begin);
    std::size_t end = begin + 1;
    while (end < user_events.size() && window_of(end) == w) ++end;
    seq.transactions.push_back(make_transaction(w, user_events.subspan(begin, end - begin)));
    begin = end;
  }
  return seq;
}

void write_transactions(std::ostream& out, std::span<const TransactionSequence> sequences) {
  for (const auto& seq : sequences) {
    for (const auto& t : seq.transactions) {
      out << seq.user << '\t' << seq.scale.name() << '\t' << t.window << '\t';
      for (std::size_t k = 0; k < t.items.size(); ++k) {
        if (k) out << ',';
        out << t.items[k] << ':' << t.counts[k] << ':' << t.last_position[k];
      }
      out << '\n';
    }
  }
}

std::vector<TransactionSequence> read_transactions(std::istream& in) {
  std::vector<TransactionSequence> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string user, scale, window, items;
    if (!std::getline(row, user, '\t') || !std::getline(row, scale, '\t') ||
        !std::getline(row, window, '\t') || !std::getline(row, items)) {
      throw ParseError(lineno, "expected 4 tab-separated fields");
    }
    Transaction t;
    UserId uid = 0;
    try {
      uid = static_cast<UserId>(std::stoul(user));
      t.window = std::stoll(window);
      std::istringstream list(items);
      std::string entry;
      while (std::getline(list, entry, ',')) {
        unsigned long item = 0, count = 0, last = 0;
        char c1 = 0, c2 = 0;
        std::istringstream es(entry);
        if (!(es >> item >> c1 >> count >> c2 >> last) || c1 != ':' || c2 != ':') {
          throw ParseError(lineno, "bad item entry '" + entry + "'");
        }
        t.items.push_back(static_cast<ItemId>(item));
        t.counts.push_back(static_cast<std::uint32_t>(count));
        t.last_position.push_back(static_cast<std::uint32_t>(last));
      }
    } catch (const std::logic_error&) {
      throw ParseError(lineno, "malformed number");
    }
    const TimeScale ts = TimeScale::parse(scale);
    if (out.empty() || out.back().user != uid || !(out.back().scale == ts)) {
      out.push_back(TransactionSequence{uid, ts, {}});
    }
    out.back().transactions.push_back(std::move(t));
  }
  return out;
}

}  // namespace lsdm
