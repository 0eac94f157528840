#include "lsdm/training.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <set>

#include "lsdm/joint.hpp"
#include "lsdm/model.hpp"

namespace lsdm {

double weighted_ce(std::span<const double> probs, std::span<const double> targets,
                   const LossWeights& weights) {
  if (probs.size() != targets.size()) {
    throw ShapeError("weighted_ce: " + std::to_string(probs.size()) + " probabilities vs " +
                     std::to_string(targets.size()) + " targets");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kProbabilityClip, 1.0 - kProbabilityClip);
    loss -= weights.positive * targets[i] * std::log(p) +
            weights.negative * (1.0 - targets[i]) * std::log(1.0 - p);
  }
  return loss;
}

ad::Var weighted_ce(ad::Var probs, std::span<const ItemId> positives, const LossWeights& weights) {
  const Tensor& p = probs.value();
  if (p.rank() != 1) throw ShapeError("weighted_ce: probabilities must be a vector");
  std::vector<double> y(p.size(), 0.0);
  for (ItemId item : positives) {
    if (item == kPaddingItem || item > p.size()) {
      throw InvalidArgument("weighted_ce: target item " + std::to_string(item) + " out of range");
    }
    y[item - 1] = 1.0;
  }
  const double loss = weighted_ce(p.values(), y, weights);
  const double m = weights.positive, n = weights.negative;
  return probs.tape->record(
      "weighted_ce", Tensor::scalar(loss), {probs},
      [probs, y = std::move(y), m, n](ad::Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        const Tensor& p = t.value(probs.id);
        Tensor& gp = t.grad_buffer(probs.id);
        for (std::size_t i = 0; i < p.size(); ++i) {
          if (p[i] < kProbabilityClip || p[i] > 1.0 - kProbabilityClip) continue;
          gp[i] += g * (y[i] > 0.0 ? -m / p[i] : n / (1.0 - p[i]));
        }
      });
}

double total_loss(std::span<const double> per_scale, double joint, double lambda) {
  double s = 0.0;
  for (double v : per_scale) s += v;
  const double total = joint + lambda * s;
  if (!std::isfinite(total)) {
    throw NumericError("total_loss: non-finite loss (joint " + std::to_string(joint) +
                       ", per-scale sum " + std::to_string(s) + ")");
  }
  return total;
}

LossParts& LossParts::operator+=(const LossParts& other) {
  total += other.total;
  joint += other.joint;
  if (per_scale.size() < other.per_scale.size()) per_scale.resize(other.per_scale.size(), 0.0);
  for (std::size_t c = 0; c < other.per_scale.size(); ++c) per_scale[c] += other.per_scale[c];
  return *this;
}

ad::Var record_user_loss(const ModelVars& vars, const UserExample& example,
                         const LossWeights& weights, double lambda, LossParts* parts) {
  if (example.scales.size() != vars.branches.size()) {
    throw ShapeError("record_user_loss: example has " + std::to_string(example.scales.size()) +
                     " scales, model has " + std::to_string(vars.branches.size()));
  }
  std::vector<ad::Var> finals;
  std::vector<double> per_scale;
  std::optional<ad::Var> scale_sum;
  for (std::size_t c = 0; c < vars.branches.size(); ++c) {
    const ScaleSequence& seq = example.scales[c];
    const auto preds = forward_sequence(vars.branches[c], seq.inputs, example.user);
    std::optional<ad::Var> acc;
    for (std::size_t j = 0; j < preds.size(); ++j) {
      ad::Var l = weighted_ce(preds[j], seq.next_items[j], weights);
      acc = acc ? ad::add(*acc, l) : l;
    }
    per_scale.push_back(acc->value().item());
    scale_sum = scale_sum ? ad::add(*scale_sum, *acc) : *acc;
    finals.push_back(preds.back());
  }
  const ItemId target[] = {example.target};
  ad::Var joint = weighted_ce(join(vars.join, finals), target, weights);
  ad::Var total = lambda == 0.0 ? joint : ad::add(joint, ad::affine(*scale_sum, lambda));
  if (parts) {
    parts->joint = joint.value().item();
    parts->per_scale = per_scale;
    parts->total = total_loss(per_scale, parts->joint, lambda);
  }
  return total;
}

namespace {

LossParts user_gradients(const LsdmParams& params, const UserExample& example,
                         const LossWeights& weights, double lambda, LsdmParams& grads) {
  ad::Tape tape;
  const ModelVars vars = bind_model(tape, params, &grads);
  LossParts parts;
  ad::Var loss = record_user_loss(vars, example, weights, lambda, &parts);
  tape.backward(loss);
  return parts;
}

}  // namespace

BatchGradients batch_gradients(const LsdmParams& params, std::span<const UserExample> batch,
                               const LossWeights& weights, double lambda, ExecutionPolicy policy) {
  BatchGradients out{params.zeros_like(), {}};
  out.loss.per_scale.assign(params.scales.size(), 0.0);

  if (policy == ExecutionPolicy::Serial) {
    for (const auto& ex : batch) out.loss += user_gradients(params, ex, weights, lambda, out.grads);
    return out;
  }

  const auto n = static_cast<std::ptrdiff_t>(batch.size());
  std::vector<LsdmParams> grads(batch.size());
  std::vector<LossParts> losses(batch.size());
  std::vector<std::exception_ptr> errors(batch.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    try {
      grads[k] = params.zeros_like();
      losses[k] = user_gradients(params, batch[k], weights, lambda, grads[k]);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<Tensor*> total;
  out.grads.for_each([&](const std::string&, Tensor& t) { total.push_back(&t); });
  for (std::size_t k = 0; k < batch.size(); ++k) {
    std::size_t i = 0;
    grads[k].for_each([&](const std::string&, Tensor& t) { *total[i++] += t; });
    out.loss += losses[k];
  }
  return out;
}

double clip_gradients(LsdmParams& grads, double max_norm) {
  // Scaled by the largest magnitude so the sum of squares cannot overflow.
  double peak = 0.0;
  grads.for_each([&](const std::string&, Tensor& t) {
    for (double v : t.values()) peak = std::max(peak, std::abs(v));
  });
  if (peak == 0.0 || !std::isfinite(peak)) return peak;
  double sq = 0.0;
  grads.for_each([&](const std::string&, Tensor& t) {
    for (double v : t.values()) sq += (v / peak) * (v / peak);
  });
  const double norm = peak * std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    grads.for_each([&](const std::string&, Tensor& t) {
      for (double& v : t.values()) v *= scale;
    });
  }
  return norm;
}

namespace {

void zero_padding_rows(LsdmParams& p) {
  for (auto& s : p.scales) {
    for (Tensor* t : {&s.item_embeddings, &s.user_embeddings}) {
      if (t->size() == 0) continue;
      for (double& v : t->row(0)) v = 0.0;
    }
  }
}

std::vector<Tensor*> tensors(LsdmParams& p) {
  std::vector<Tensor*> out;
  p.for_each([&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

}  // namespace

void optimizer_step(LsdmParams& params, LsdmParams& grads, OptimizerState& state,
                    const OptimizerConfig& config, double learning_rate) {
  zero_padding_rows(grads);
  auto p = tensors(params);
  auto g = tensors(grads);
  if (p.size() != g.size()) throw ShapeError("optimizer_step: gradient layout differs from parameters");

  if (config.kind == OptimizerKind::Sgd) {
    ++state.step;
    for (std::size_t k = 0; k < p.size(); ++k)
      for (std::size_t i = 0; i < p[k]->size(); ++i) (*p[k])[i] -= learning_rate * (*g[k])[i];
    zero_padding_rows(params);
    return;
  }

  if (state.first_moment.scales.empty()) {
    state.first_moment = params.zeros_like();
    state.second_moment = params.zeros_like();
  }
  auto m = tensors(state.first_moment);
  auto v = tensors(state.second_moment);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < p.size(); ++k) {
    Tensor& P = *p[k];
    const Tensor& G = *g[k];
    Tensor& M = *m[k];
    Tensor& V = *v[k];
    for (std::size_t i = 0; i < P.size(); ++i) {
      M[i] = config.beta1 * M[i] + (1.0 - config.beta1) * G[i];
      V[i] = config.beta2 * V[i] + (1.0 - config.beta2) * G[i] * G[i];
      P[i] -= learning_rate * (M[i] / c1) / (std::sqrt(V[i] / c2) + config.epsilon);
    }
  }
  zero_padding_rows(params);
}

void TrainConfig::validate() const {
  if (scales.empty()) throw InvalidArgument("train: scales must not be empty");
  for (std::size_t a = 0; a < scales.size(); ++a)
    for (std::size_t b = a + 1; b < scales.size(); ++b)
      if (scales[a] == scales[b]) throw InvalidArgument("train: duplicate scale " + scales[a].name());
  if (dim == 0) throw InvalidArgument("train: dim must be >= 1");
  if (epochs == 0) throw InvalidArgument("train: epochs must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("train: learning_rate must be finite and >= 0");
  }
  if (batch_size == 0) throw InvalidArgument("train: batch_size must be >= 1");
  if (!(per_scale_loss_weight >= 0.0)) throw InvalidArgument("train: lambda must be >= 0");
  if (!(gradient_clip_norm >= 0.0)) throw InvalidArgument("train: gradient_clip_norm must be >= 0");
  if (!(loss_weights.positive > 0.0) || !(loss_weights.negative > 0.0)) {
    throw InvalidArgument("train: loss weights m and n must be > 0");
  }
  if (!(max_items_percentile > 0.0 && max_items_percentile <= 1.0)) {
    throw InvalidArgument("train: max_items_percentile must lie in (0, 1]");
  }
  if (max_items_cap == 0) throw InvalidArgument("train: max_items_cap must be >= 1");
}

std::vector<UserExample> training_examples(const PurchaseLog& train, const SequenceBuilder& builder,
                                           std::size_t* skipped) {
  std::vector<UserExample> out;
  std::size_t skip = 0;
  for (UserId u = 1; u <= train.num_users(); ++u) {
    const auto events = train.user_events(u);
    if (events.size() < 2) {
      ++skip;
      continue;
    }
    out.push_back(builder.build(u, events.first(events.size() - 1), events.back().item));
  }
  if (skipped) *skipped = skip;
  return out;
}

TrainState init_training(const Split& split, const TrainConfig& config) {
  config.validate();
  if (split.train.empty()) throw InvalidArgument("train: training split is empty");
  TrainState state;
  state.model.epoch = config.epoch_anchor.value_or(default_epoch(split.train));
  std::vector<std::size_t> max_items;
  for (const auto& s : config.scales) {
    max_items.push_back(choose_max_items(split.train, s, state.model.epoch,
                                         config.max_items_percentile, config.max_items_cap));
  }
  InitOptions init;
  init.seed = config.seed;
  init.hidden_width = config.hidden_width;
  const ModelDims dims{split.train.num_users(), split.train.num_items(), config.dim};
  state.model.params =
      init_params(dims, config.scales, max_items, config.join, config.share_embeddings, init);
  return state;
}

void train(TrainState& state, const Split& split, const TrainConfig& config,
           const TrainHooks& hooks) {
  config.validate();
  const SequenceBuilder builder = state.model.builder();
  const std::vector<UserExample> examples = training_examples(split.train, builder);
  if (examples.empty()) throw InvalidArgument("train: no user has 2 or more training events");

  for (std::size_t epoch = state.epochs_done + 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(config.seed * 1000003ULL + epoch);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<UserExample> shuffled;
    shuffled.reserve(examples.size());
    for (auto k : order) shuffled.push_back(examples[k]);

    LossParts epoch_loss;
    epoch_loss.per_scale.assign(config.scales.size(), 0.0);
    for (std::size_t b = 0; b < shuffled.size(); b += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, shuffled.size() - b);
      BatchGradients bg;
      try {
        bg = batch_gradients(state.model.params, std::span(shuffled).subspan(b, len),
                             config.loss_weights, config.per_scale_loss_weight, config.policy);
      } catch (const NumericError& e) {
        throw TrainingDiverged(std::string("training diverged: ") + e.what(), epoch);
      }
      if (!std::isfinite(bg.loss.total)) {
        throw TrainingDiverged("training diverged: non-finite loss", epoch);
      }
      clip_gradients(bg.grads, config.gradient_clip_norm);
      optimizer_step(state.model.params, bg.grads, state.optimizer, config.optimizer,
                     config.learning_rate);
      epoch_loss += bg.loss;
    }
    state.history.push_back({epoch, epoch_loss});
    state.epochs_done = epoch;
    if (hooks.on_epoch) hooks.on_epoch(state);
  }
}

TrainState train(const Split& split, const TrainConfig& config, const TrainHooks& hooks) {
  TrainState state = init_training(split, config);
  train(state, split, config, hooks);
  return state;
}

}  // namespace lsdm
