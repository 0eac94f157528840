#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lsdm/error.hpp"
#include "lsdm/model.hpp"
#include "lsdm/params.hpp"
#include "lsdm/predictor.hpp"
#include "lsdm/sequences.hpp"
#include "lsdm/split.hpp"
#include "lsdm/tape.hpp"

namespace lsdm {

/// Class weights of the cross-entropy: m for positives, n for negatives.
struct LossWeights {
  double positive = 500.0;
  double negative = 1.0;
};

inline constexpr double kProbabilityClip = 1e-12;

/// sum_i -m y_i log p_i - n (1 - y_i) log(1 - p_i), with p clipped into
/// [1e-12, 1 - 1e-12]. `targets` holds 0/1 values.
double weighted_ce(std::span<const double> probs, std::span<const double> targets,
                   const LossWeights& weights);

/// Same loss on the tape; `positives` lists item ids (1-based) with y = 1.
ad::Var weighted_ce(ad::Var probs, std::span<const ItemId> positives, const LossWeights& weights);

/// joint + lambda * sum(per_scale). Throws NumericError on a non-finite input.
double total_loss(std::span<const double> per_scale, double joint, double lambda);

struct LossParts {
  double total = 0.0;
  double joint = 0.0;
  std::vector<double> per_scale;

  LossParts& operator+=(const LossParts& other);
};

/// Records one user's loss on `tape`: every step of every scale supervised
/// with its successor (weighted by lambda), plus the joint prediction of the
/// final step against the target.
ad::Var record_user_loss(const ModelVars& vars, const UserExample& example,
                         const LossWeights& weights, double lambda, LossParts* parts = nullptr);

enum class ExecutionPolicy { Serial, Parallel };

struct BatchGradients {
  LsdmParams grads;
  LossParts loss;
};

/// Sum of per-user gradients and losses over `batch`. The parallel path runs
/// one tape per user and reduces in batch order; it is bitwise identical to
/// the serial reference.
BatchGradients batch_gradients(const LsdmParams& params, std::span<const UserExample> batch,
                               const LossWeights& weights, double lambda, ExecutionPolicy policy);

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  LsdmParams first_moment;
  LsdmParams second_moment;
  std::uint64_t step = 0;
};

/// Scales `grads` so its global L2 norm is at most `max_norm` (0 disables).
/// Returns the norm before clipping.
double clip_gradients(LsdmParams& grads, double max_norm);

/// One update. Padding rows of the embeddings receive no update.
void optimizer_step(LsdmParams& params, LsdmParams& grads, OptimizerState& state,
                    const OptimizerConfig& config, double learning_rate);

struct TrainConfig {
  std::vector<TimeScale> scales{TimeScale::item(), TimeScale::day(), TimeScale::week()};
  std::size_t dim = 50;
  std::size_t epochs = 10;
  double learning_rate = 0.001;
  std::size_t batch_size = 100;
  OptimizerConfig optimizer;
  double per_scale_loss_weight = 1.0;  // lambda
  double gradient_clip_norm = 5.0;
  LossWeights loss_weights;
  std::uint64_t seed = 42;
  bool share_embeddings = false;
  JoinStrategy join = JoinStrategy::Mlp;
  std::size_t hidden_width = 0;  // 0 means |I|
  double max_items_percentile = 0.95;
  std::size_t max_items_cap = 20;
  /// Window anchor for Day/Week bucketing; defaults to midnight before the
  /// earliest event.
  std::optional<Timestamp> epoch_anchor;
  ExecutionPolicy policy = ExecutionPolicy::Parallel;

  void validate() const;
};

struct EpochLoss {
  std::size_t epoch = 0;
  LossParts loss;
};

/// Everything needed to continue training exactly where it stopped.
struct TrainState {
  LsdmModel model;
  OptimizerState optimizer;
  std::size_t epochs_done = 0;
  std::vector<EpochLoss> history;
};

struct TrainHooks {
  /// Called after every completed epoch (e.g. to checkpoint).
  std::function<void(const TrainState&)> on_epoch;
};

/// Training examples: each user's training history minus its last event,
/// targeting that last event. Users with fewer than 2 training events are
/// skipped and counted in `skipped`.
std::vector<UserExample> training_examples(const PurchaseLog& train, const SequenceBuilder& builder,
                                           std::size_t* skipped = nullptr);

/// Fresh model for `split.train` (max_items per scale, window anchor, init).
TrainState init_training(const Split& split, const TrainConfig& config);

/// Runs the remaining epochs of `state` (all of them for a fresh state) on
/// `split.train`. Throws TrainingDiverged on a non-finite loss.
void train(TrainState& state, const Split& split, const TrainConfig& config,
           const TrainHooks& hooks = {});

/// Convenience: init_training + train.
TrainState train(const Split& split, const TrainConfig& config, const TrainHooks& hooks = {});

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, std::size_t epoch)
      : Error(what), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace lsdm
