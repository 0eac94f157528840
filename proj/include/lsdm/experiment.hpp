#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lsdm/config.hpp"
#include "lsdm/evaluation.hpp"
#include "lsdm/predictor.hpp"
#include "lsdm/split.hpp"
#include "lsdm/synthetic.hpp"
#include "lsdm/training.hpp"

namespace lsdm {

struct Dataset {
  PurchaseLog log;
  std::optional<IdMap> users;  // set for file input
  std::optional<IdMap> items;
  std::vector<EventAnnotation> annotations;  // set for synthetic input
};

/// Reads `config.data` or generates `config.synthetic`; exactly one must be set.
Dataset load_dataset(const ExperimentConfig& config);

Scorer model_scorer(const LsdmModel& model);
Scorer pop_scorer(const PurchaseLog& train);

std::string scales_label(const std::vector<TimeScale>& scales);  // e.g. "item+day+week"

struct AblationRow {
  std::vector<TimeScale> scales;
  JoinStrategy join = JoinStrategy::Average;
  /// Means over seeds, same order as MetricReport::metrics.
  std::vector<Metric> metrics;
  /// (x - base) / base against the item-only row with the same join; NaN
  /// when the base is 0 or no item-only row exists.
  std::vector<double> improvement;
  /// Paired t-test on Hit@<first k> against that base, users pooled over seeds.
  std::optional<TTestResult> vs_base;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<Metric> pop_metrics;  // Pop baseline, for reference
};

using Progress = std::function<void(const std::string&)>;

/// Trains every (scale set, join) cell of `config.ablation` for every seed
/// with the budget of `config.train` and evaluates on the test targets.
AblationResult run_ablation(const Split& split, const ExperimentConfig& config,
                            const Progress& progress = {});

/// `epoch  total  joint  <scale>...` with round-trip precision.
void write_loss_history(std::ostream& out, const std::vector<EpochLoss>& history,
                        const std::vector<TimeScale>& scales);

/// `method  scales  join  <metric>...  users  skipped`.
struct SummaryRow {
  std::string method;
  std::string scales;
  std::string join;
  const MetricReport* report = nullptr;
};
void write_metrics_tsv(std::ostream& out, const std::vector<SummaryRow>& rows);

void write_ablation_tsv(std::ostream& out, const AblationResult& result);

}  // namespace lsdm
