#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lsdm/purchase_log.hpp"
#include "lsdm/split.hpp"

namespace lsdm {

/// Top of a ranking: item ids by descending score, ties by ascending id.
struct RankedList {
  std::vector<ItemId> items;
  /// Set when the requested k exceeded |I| and was reduced to |I|.
  bool clamped = false;
};

/// scores[j] belongs to item j + 1. Throws InvalidArgument on a non-finite score.
RankedList rank_items(std::span<const double> scores, std::size_t k);

/// 1-based position of `target` in the full ranking of `scores`.
std::size_t rank_of(std::span<const double> scores, ItemId target);

/// 1 if `target` is in `ranked`, else 0.
int hit_at_k(const RankedList& ranked, ItemId target);

/// 1 / log2(c + 1) for target at 1-based position c in `ranked`, else 0.
double ndcg_at_k(const RankedList& ranked, ItemId target);

/// Training purchase count per item (entry j for item j + 1).
std::vector<double> pop_baseline(const PurchaseLog& train);

/// Scores all items for `user` given its time-sorted history. Must be safe to
/// call concurrently when evaluation runs in parallel.
using Scorer = std::function<std::vector<double>(UserId user, std::span<const Event> history)>;

struct Metric {
  std::string name;
  std::vector<double> per_user;
  double mean = 0.0;
};

struct MetricReport {
  std::vector<UserId> users;
  std::vector<Metric> metrics;  // Hit@k for every k, then NDCG@k for every k
  std::size_t skipped = 0;
  bool k_clamped = false;

  const Metric& at(const std::string& name) const;
};

enum class EvalTarget { Validation, Test };

struct EvalOptions {
  std::vector<std::size_t> ks{5, 10};
  EvalTarget target = EvalTarget::Test;
  bool parallel = true;
};

/// Validation target is scored from the training history; test target from
/// training history plus the validation event. Users without training events
/// are skipped and counted.
MetricReport evaluate(const Scorer& scorer, const Split& split, const EvalOptions& options = {});

struct TTestResult {
  double t = 0.0;
  double p_value = 1.0;
  std::size_t df = 0;
};

/// Paired two-sided t-test on per-user values. Identical samples give t = 0,
/// p = 1; a constant non-zero difference gives |t| = inf, p = 0.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// `user` then one column per metric.
void write_per_user(std::ostream& out, const MetricReport& report);

}  // namespace lsdm
