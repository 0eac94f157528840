#include "lsdm/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

#include "lsdm/error.hpp"

namespace lsdm {

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<Metric> average(const std::vector<MetricReport>& reports) {
  std::vector<Metric> out = reports.front().metrics;
  for (std::size_t r = 1; r < reports.size(); ++r) {
    for (std::size_t q = 0; q < out.size(); ++q) {
      const auto& more = reports[r].metrics[q].per_user;
      out[q].per_user.insert(out[q].per_user.end(), more.begin(), more.end());
    }
  }
  for (auto& m : out) {
    double sum = 0.0;
    for (double v : m.per_user) sum += v;
    m.mean = m.per_user.empty() ? 0.0 : sum / static_cast<double>(m.per_user.size());
  }
  return out;
}

}  // namespace

Dataset load_dataset(const ExperimentConfig& config) {
  if (config.data && config.synthetic) {
    throw ConfigError("config: data and synthetic are mutually exclusive");
  }
  Dataset d;
  if (config.synthetic) {
    SyntheticLog s = generate_synthetic(*config.synthetic);
    d.log = std::move(s.log);
    d.annotations = std::move(s.annotations);
    return d;
  }
  if (!config.data) throw ConfigError("config: one of data or synthetic is required");
  std::ifstream in(config.data->path);
  if (!in) throw ConfigError("data.path: cannot open " + config.data->path.string());
  ParsedLog parsed = parse_purchase_log(in, config.data->schema);
  d.log = std::move(parsed.log);
  d.users = std::move(parsed.users);
  d.items = std::move(parsed.items);
  return d;
}

Scorer model_scorer(const LsdmModel& model) {
  return [&model](UserId user, std::span<const Event> history) {
    const Tensor s = model.score(user, history);
    return std::vector<double>(s.values().begin(), s.values().end());
  };
}

Scorer pop_scorer(const PurchaseLog& train) {
  return [counts = pop_baseline(train)](UserId, std::span<const Event>) { return counts; };
}

std::string scales_label(const std::vector<TimeScale>& scales) {
  std::string out;
  for (const auto& s : scales) out += (out.empty() ? "" : "+") + s.name();
  return out;
}

AblationResult run_ablation(const Split& split, const ExperimentConfig& config,
                            const Progress& progress) {
  const auto& ab = config.ablation;
  if (ab.scale_sets.empty() || ab.joins.empty() || ab.seeds.empty()) {
    throw InvalidArgument("ablation: scale_sets, joins and seeds must be non-empty");
  }
  AblationResult result;
  result.pop_metrics = evaluate(pop_scorer(split.train), split, config.eval).metrics;

  for (const auto& scales : ab.scale_sets) {
    for (JoinStrategy join : ab.joins) {
      AblationRow row;
      row.scales = scales;
      row.join = join;
      std::vector<MetricReport> reports;
      for (std::uint64_t seed : ab.seeds) {
        TrainConfig tc = config.train;
        tc.scales = scales;
        tc.join = join;
        tc.seed = seed;
        if (progress) {
          progress("ablate " + scales_label(scales) + " " + std::string(join_name(join)) +
                   " seed " + std::to_string(seed));
        }
        const TrainState state = train(split, tc);
        reports.push_back(evaluate(model_scorer(state.model), split, config.eval));
      }
      row.metrics = average(reports);
      result.rows.push_back(std::move(row));
    }
  }

  for (auto& row : result.rows) {
    const AblationRow* base = nullptr;
    for (const auto& other : result.rows) {
      if (other.join == row.join && other.scales == std::vector<TimeScale>{TimeScale::item()}) {
        base = &other;
      }
    }
    for (std::size_t q = 0; q < row.metrics.size(); ++q) {
      const double b = base ? base->metrics[q].mean : 0.0;
      row.improvement.push_back(b > 0.0 ? (row.metrics[q].mean - b) / b
                                        : std::numeric_limits<double>::quiet_NaN());
    }
    if (base && base != &row && row.metrics.front().per_user.size() >= 2) {
      row.vs_base = paired_t_test(row.metrics.front().per_user, base->metrics.front().per_user);
    }
  }
  return result;
}

void write_loss_history(std::ostream& out, const std::vector<EpochLoss>& history,
                        const std::vector<TimeScale>& scales) {
  out << "epoch\ttotal\tjoint";
  for (const auto& s : scales) out << '\t' << s.name();
  out << '\n';
  for (const auto& h : history) {
    out << h.epoch << '\t' << num(h.loss.total) << '\t' << num(h.loss.joint);
    for (double v : h.loss.per_scale) out << '\t' << num(v);
    out << '\n';
  }
}

void write_metrics_tsv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  if (rows.empty()) return;
  out << "method\tscales\tjoin";
  for (const auto& m : rows.front().report->metrics) out << '\t' << m.name;
  out << "\tusers\tskipped\n";
  for (const auto& r : rows) {
    out << r.method << '\t' << r.scales << '\t' << r.join;
    for (const auto& m : r.report->metrics) out << '\t' << num(m.mean);
    out << '\t' << r.report->users.size() << '\t' << r.report->skipped << '\n';
  }
}

void write_ablation_tsv(std::ostream& out, const AblationResult& result) {
  if (result.rows.empty()) return;
  out << "scales\tjoin";
  for (const auto& m : result.rows.front().metrics) out << '\t' << m.name;
  for (const auto& m : result.rows.front().metrics) out << "\tincrease_" << m.name;
  out << "\tp_value\n";
  for (const auto& row : result.rows) {
    out << scales_label(row.scales) << '\t' << join_name(row.join);
    for (const auto& m : row.metrics) out << '\t' << num(m.mean);
    for (double v : row.improvement) out << '\t' << num(v);
    out << '\t' << (row.vs_base ? num(row.vs_base->p_value) : "nan") << '\n';
  }
}

}  // namespace lsdm
