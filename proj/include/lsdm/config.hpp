#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lsdm/error.hpp"
#include "lsdm/evaluation.hpp"
#include "lsdm/purchase_log.hpp"
#include "lsdm/synthetic.hpp"
#include "lsdm/training.hpp"

namespace lsdm {

/// Bad configuration file, key or override. The message starts with the
/// dotted key path.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct DataSource {
  std::filesystem::path path;
  LogSchema schema;
};

struct AblationConfig {
  std::vector<std::vector<TimeScale>> scale_sets;
  std::vector<JoinStrategy> joins;
  /// Each cell is trained once per seed and metrics are averaged.
  std::vector<std::uint64_t> seeds;
};

struct ExperimentConfig {
  std::optional<DataSource> data;
  std::optional<SyntheticSpec> synthetic;
  TrainConfig train;
  EvalOptions eval;
  std::filesystem::path output_dir = "lsdm-out";
  /// Write a checkpoint every k epochs (the last epoch is always written).
  std::size_t checkpoint_every = 1;
  AblationConfig ablation;
};

/// Keys:
///   seed, scales, join, output_dir, checkpoint_every,
///   data      {path, delimiter, has_header, user_column, item_column,
///              time_column, id_type}
///   synthetic {num_users, num_items, horizon_days, periodic_rules[],
///              copurchase_rules[], noise_rate, seed, rules_per_user,
///              random_phase, start_time}
///   train     {dim, epochs, learning_rate, batch_size, optimizer{kind, beta1,
///              beta2, epsilon}, lambda, gradient_clip_norm, loss_weights{m, n},
///              share_embeddings, hidden_width, max_items_percentile,
///              max_items_cap, epoch_anchor, parallel}
///   eval      {ks, parallel}
///   ablation  {scale_sets, joins, seeds}
/// Unknown keys are rejected.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& file);

/// Inverse of parse_config; every field is written explicitly.
nlohmann::json to_json(const ExperimentConfig& config);
nlohmann::json to_json(const TrainConfig& config);
nlohmann::json to_json(const SyntheticSpec& spec);
SyntheticSpec parse_synthetic(const nlohmann::json& j);

/// Applies `dotted.key=value`. The value is parsed as JSON when possible and
/// taken as a string otherwise; intermediate objects are created.
void apply_override(nlohmann::json& j, std::string_view assignment);

}  // namespace lsdm
