#include "lsdm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <ostream>

#include <boost/math/distributions/students_t.hpp>

#include "lsdm/error.hpp"

namespace lsdm {

namespace {

void require_finite(std::span<const double> scores) {
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (!std::isfinite(scores[j])) {
      throw InvalidArgument("rank_items: score of item " + std::to_string(j + 1) + " is not finite");
    }
  }
}

}  // namespace

RankedList rank_items(std::span<const double> scores, std::size_t k) {
  require_finite(scores);
  RankedList out;
  if (k > scores.size()) {
    k = scores.size();
    out.clamped = true;
  }
  std::vector<ItemId> ids(scores.size());
  std::iota(ids.begin(), ids.end(), ItemId{1});
  auto before = [&](ItemId a, ItemId b) {
    const double sa = scores[a - 1], sb = scores[b - 1];
    return sa != sb ? sa > sb : a < b;
  };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(), before);
  ids.resize(k);
  out.items = std::move(ids);
  return out;
}

std::size_t rank_of(std::span<const double> scores, ItemId target) {
  if (target == kPaddingItem || target > scores.size()) {
    throw InvalidArgument("rank_of: target item " + std::to_string(target) + " out of range");
  }
  require_finite(scores);
  const double s = scores[target - 1];
  std::size_t ahead = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > s || (scores[j] == s && j + 1 < target)) ++ahead;
  }
  return ahead + 1;
}

int hit_at_k(const RankedList& ranked, ItemId target) {
  return std::find(ranked.items.begin(), ranked.items.end(), target) != ranked.items.end() ? 1 : 0;
}

double ndcg_at_k(const RankedList& ranked, ItemId target) {
  const auto it = std::find(ranked.items.begin(), ranked.items.end(), target);
  if (it == ranked.items.end()) return 0.0;
  const auto c = static_cast<double>(it - ranked.items.begin() + 1);
  return 1.0 / std::log2(c + 1.0);
}

std::vector<double> pop_baseline(const PurchaseLog& train) {
  if (train.empty()) throw InvalidArgument("pop_baseline: training log is empty");
  std::vector<double> counts(train.num_items(), 0.0);
  for (const auto& e : train.events()) counts[e.item - 1] += 1.0;
  return counts;
}

const Metric& MetricReport::at(const std::string& name) const {
  for (const auto& m : metrics)
    if (m.name == name) return m;
  throw InvalidArgument("no metric named " + name);
}

MetricReport evaluate(const Scorer& scorer, const Split& split, const EvalOptions& options) {
  if (options.ks.empty()) throw InvalidArgument("evaluate: ks must not be empty");
  const PurchaseLog& train = split.train;
  const std::size_t max_k = *std::max_element(options.ks.begin(), options.ks.end());

  MetricReport report;
  std::vector<UserId> users;
  for (UserId u = 1; u <= train.num_users(); ++u) {
    if (train.user_events(u).empty() || u >= split.test.size() || split.test[u].user != u) {
      ++report.skipped;
      continue;
    }
    users.push_back(u);
  }

  const std::size_t nk = options.ks.size();
  std::vector<std::vector<double>> values(users.size(), std::vector<double>(2 * nk, 0.0));
  std::vector<char> clamped(users.size(), 0);
  std::vector<std::exception_ptr> errors(users.size());
  const auto n = static_cast<std::ptrdiff_t>(users.size());
#pragma omp parallel for schedule(dynamic, 4) if (options.parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const UserId u = users[i];
      std::vector<Event> history(train.user_events(u).begin(), train.user_events(u).end());
      ItemId target = split.validation[u].item;
      if (options.target == EvalTarget::Test) {
        history.push_back(split.validation[u]);
        target = split.test[u].item;
      }
      const std::vector<double> scores = scorer(u, history);
      if (scores.size() != train.num_items()) {
        throw ShapeError("evaluate: scorer returned " + std::to_string(scores.size()) +
                         " scores for " + std::to_string(train.num_items()) + " items");
      }
      const RankedList top = rank_items(scores, max_k);
      clamped[i] = top.clamped;
      for (std::size_t q = 0; q < nk; ++q) {
        RankedList prefix;
        const std::size_t k = std::min(options.ks[q], top.items.size());
        prefix.items.assign(top.items.begin(), top.items.begin() + static_cast<std::ptrdiff_t>(k));
        values[i][q] = hit_at_k(prefix, target);
        values[i][nk + q] = ndcg_at_k(prefix, target);
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  report.users = std::move(users);
  report.k_clamped = std::any_of(clamped.begin(), clamped.end(), [](char c) { return c != 0; });
  for (std::size_t col = 0; col < 2 * nk; ++col) {
    Metric m;
    m.name = (col < nk ? "Hit@" : "NDCG@") + std::to_string(options.ks[col % nk]);
    for (const auto& row : values) m.per_user.push_back(row[col]);
    double sum = 0.0;
    for (double v : m.per_user) sum += v;
    m.mean = m.per_user.empty() ? 0.0 : sum / static_cast<double>(m.per_user.size());
    report.metrics.push_back(std::move(m));
  }
  return report;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("paired_t_test: samples differ in size");
  if (a.size() < 2) throw InvalidArgument("paired_t_test: need at least 2 pairs");
  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  TTestResult r;
  r.df = a.size() - 1;
  const double se = std::sqrt(ss / (n - 1.0) / n);
  if (se == 0.0) {
    if (mean == 0.0) return r;
    r.t = std::copysign(std::numeric_limits<double>::infinity(), mean);
    r.p_value = 0.0;
    return r;
  }
  r.t = mean / se;
  const boost::math::students_t dist(static_cast<double>(r.df));
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t)));
  return r;
}

void write_per_user(std::ostream& out, const MetricReport& report) {
  out << "user";
  for (const auto& m : report.metrics) out << '\t' << m.name;
  out << '\n';
  for (std::size_t i = 0; i < report.users.size(); ++i) {
    out << report.users[i];
    for (const auto& m : report.metrics) out << '\t' << m.per_user[i];
    out << '\n';
  }
}

}  // namespace lsdm
