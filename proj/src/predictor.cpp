#include "lsdm/predictor.hpp"

#include "lsdm/error.hpp"
#include "lsdm/model.hpp"

namespace lsdm {

std::vector<TimeScale> LsdmModel::scales() const {
  std::vector<TimeScale> out;
  for (const auto& s : params.scales) out.push_back(s.scale);
  return out;
}

SequenceBuilder LsdmModel::builder() const {
  std::vector<std::size_t> max_items;
  for (const auto& s : params.scales) max_items.push_back(s.max_items);
  return SequenceBuilder(scales(), std::move(max_items), epoch);
}

PredictionMatrix LsdmModel::scale_predictions(UserId user, std::span<const Event> history) const {
  if (history.empty()) throw InvalidArgument("cannot score user with empty history");
  const UserExample ex = builder().build(user, history, history.back().item);
  ad::Tape tape;
  const ModelVars vars = bind_model(tape, params, nullptr);
  PredictionMatrix out;
  for (std::size_t c = 0; c < vars.branches.size(); ++c) {
    const auto preds = forward_sequence(vars.branches[c], ex.scales[c].inputs, user);
    out.rows.push_back(preds.back().value());
  }
  return out;
}

Tensor LsdmModel::score(UserId user, std::span<const Event> history) const {
  return join(scale_predictions(user, history), params.join);
}

}  // namespace lsdm
