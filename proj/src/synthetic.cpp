#include "lsdm/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <unordered_map>

#include "lsdm/error.hpp"

namespace lsdm {

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw InvalidArgument("synthetic spec field '" + field + "' " + why);
  };
  if (num_users == 0) fail("num_users", "must be >= 1");
  if (num_items == 0) fail("num_items", "must be >= 1");
  if (horizon_days < 1) fail("horizon_days", "must be >= 1");
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) fail("noise_rate", "must lie in [0, 1]");
  if (start_time % kSecondsPerDay != 0) fail("start_time", "must be a UTC midnight");
  if (rules_per_user > periodic_rules.size()) {
    fail("rules_per_user", "exceeds the number of periodic rules");
  }
  auto check_item = [&](ItemId item, const std::string& field) {
    if (item < 1 || item > num_items) fail(field, "must be an item id in [1, num_items]");
  };
  for (std::size_t k = 0; k < periodic_rules.size(); ++k) {
    const auto& r = periodic_rules[k];
    const std::string base = "periodic_rules[" + std::to_string(k) + "].";
    check_item(r.item, base + "item");
    if (r.period_days < 1) fail(base + "period_days", "must be >= 1");
    if (r.jitter_days < 0) fail(base + "jitter_days", "must be >= 0");
  }
  for (std::size_t k = 0; k < copurchase_rules.size(); ++k) {
    const auto& r = copurchase_rules[k];
    const std::string base = "copurchase_rules[" + std::to_string(k) + "].";
    check_item(r.trigger, base + "trigger_item");
    check_item(r.companion, base + "companion_item");
    if (r.gap_events < 0) fail(base + "gap_events", "must be >= 0");
    if (!(r.probability >= 0.0 && r.probability <= 1.0)) fail(base + "probability", "must lie in [0, 1]");
  }
}

namespace {

struct Draft {
  int day;
  ItemId item;
  EventSource source;
  std::size_t rule;
};

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}

  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  double uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<int>(i - 1)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace

SyntheticLog generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Stream rng(spec.seed);

  std::set<ItemId> ruled;
  for (const auto& r : spec.periodic_rules) ruled.insert(r.item);
  for (const auto& r : spec.copurchase_rules) {
    ruled.insert(r.trigger);
    ruled.insert(r.companion);
  }
  std::vector<ItemId> noise_pool;
  for (ItemId i = 1; i <= spec.num_items; ++i)
    if (!ruled.count(i)) noise_pool.push_back(i);
  if (noise_pool.empty()) {
    noise_pool.resize(spec.num_items);
    std::iota(noise_pool.begin(), noise_pool.end(), ItemId{1});
  }

  std::vector<EventAnnotation> annotations;
  std::vector<Event> events;
  for (UserId u = 1; u <= spec.num_users; ++u) {
    std::vector<std::size_t> rules(spec.periodic_rules.size());
    std::iota(rules.begin(), rules.end(), std::size_t{0});
    if (spec.rules_per_user > 0) {
      rng.shuffle(rules);
      rules.resize(spec.rules_per_user);
      std::sort(rules.begin(), rules.end());
    }

    std::vector<Draft> drafts;
    for (std::size_t r : rules) {
      const auto& rule = spec.periodic_rules[r];
      const int phase = spec.random_phase ? rng.uniform_int(0, rule.period_days - 1) : 0;
      for (int d = phase; d < spec.horizon_days; d += rule.period_days) {
        int day = d;
        if (rule.jitter_days > 0) day += rng.uniform_int(-rule.jitter_days, rule.jitter_days);
        day = std::clamp(day, 0, spec.horizon_days - 1);
        drafts.push_back({day, rule.item, EventSource::Periodic, r});
      }
    }
    if (spec.noise_rate > 0.0) {
      for (int d = 0; d < spec.horizon_days; ++d) {
        if (rng.uniform01() < spec.noise_rate) {
          const auto k = static_cast<std::size_t>(
              rng.uniform_int(0, static_cast<int>(noise_pool.size()) - 1));
          drafts.push_back({d, noise_pool[k], EventSource::Noise, 0});
        }
      }
    }

    // Group by day, random order inside a day.
    std::stable_sort(drafts.begin(), drafts.end(),
                     [](const Draft& a, const Draft& b) { return a.day < b.day; });
    for (std::size_t b = 0; b < drafts.size();) {
      std::size_t e = b;
      while (e < drafts.size() && drafts[e].day == drafts[b].day) ++e;
      std::vector<Draft> group(drafts.begin() + static_cast<std::ptrdiff_t>(b),
                               drafts.begin() + static_cast<std::ptrdiff_t>(e));
      rng.shuffle(group);
      std::copy(group.begin(), group.end(), drafts.begin() + static_cast<std::ptrdiff_t>(b));
      b = e;
    }

    for (std::size_t i = 0; i < drafts.size(); ++i) {
      if (drafts[i].source == EventSource::Copurchase) continue;
      const ItemId trigger = drafts[i].item;
      std::size_t pending = 0;  // companions already placed right after this trigger
      for (std::size_t r = 0; r < spec.copurchase_rules.size(); ++r) {
        const auto& rule = spec.copurchase_rules[r];
        if (rule.trigger != trigger) continue;
        if (rng.uniform01() >= rule.probability) continue;
        const std::size_t offset =
            static_cast<std::size_t>(std::max(rule.gap_events, 1)) + pending;
        const std::size_t pos = std::min(i + offset, drafts.size());
        const int day = drafts[pos - 1].day;
        drafts.insert(drafts.begin() + static_cast<std::ptrdiff_t>(pos),
                      Draft{day, rule.companion, EventSource::Copurchase, r});
        if (rule.gap_events <= 1) ++pending;
      }
    }

    if (drafts.size() < 3) {
      throw InvalidArgument("horizon too short: user " + std::to_string(u) + " gets only " +
                            std::to_string(drafts.size()) + " events (need >= 3)");
    }

    for (std::size_t b = 0; b < drafts.size();) {
      std::size_t e = b;
      while (e < drafts.size() && drafts[e].day == drafts[b].day) ++e;
      const Timestamp spacing = std::min<Timestamp>(60, 16 * 3600 / static_cast<Timestamp>(e - b));
      for (std::size_t k = b; k < e; ++k) {
        const Timestamp t = spec.start_time + drafts[k].day * kSecondsPerDay + 8 * 3600 +
                            static_cast<Timestamp>(k - b) * spacing;
        Event ev{u, drafts[k].item, t};
        events.push_back(ev);
        annotations.push_back({ev, drafts[k].source, drafts[k].rule});
      }
      b = e;
    }
  }

  SyntheticLog out;
  out.log = PurchaseLog(events, spec.num_users, spec.num_items);
  out.annotations = std::move(annotations);
  return out;
}

void write_annotations(std::ostream& out, const std::vector<EventAnnotation>& annotations) {
  out << "user,item,timestamp,source,rule\n";
  for (const auto& a : annotations) {
    const char* src = a.source == EventSource::Periodic     ? "periodic"
                      : a.source == EventSource::Copurchase ? "copurchase"
                                                            : "noise";
    out << a.event.user << ',' << a.event.item << ',' << a.event.time << ',' << src << ',';
    if (a.source != EventSource::Noise) out << a.rule;
    out << '\n';
  }
}

double measure_repurchase_rate(const PurchaseLog& log, TimeScale scale) {
  if (log.empty()) return 0.0;
  const Timestamp epoch = default_epoch(log);
  std::size_t users = 0, qualifying = 0;
  for (UserId u = 1; u <= log.num_users(); ++u) {
    const auto events = log.user_events(u);
    if (events.empty()) continue;
    ++users;
    const auto seq = bucket_by_scale(events, scale, epoch);
    std::unordered_map<ItemId, std::size_t> presence;
    std::size_t best = 0;
    for (const auto& t : seq.transactions)
      for (ItemId item : t.items) best = std::max(best, ++presence[item]);
    if (2 * best >= seq.transactions.size()) ++qualifying;
  }
  return users ? static_cast<double>(qualifying) / static_cast<double>(users) : 0.0;
}

}  // namespace lsdm
