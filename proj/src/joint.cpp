#include "lsdm/joint.hpp"

#include "lsdm/error.hpp"

namespace lsdm {

ad::Var join(const JoinVars& params, std::span<const ad::Var> rows) {
  if (rows.empty()) throw ShapeError("join: no prediction rows");
  const auto& shape = rows.front().shape();
  if (shape.size() != 1) throw ShapeError("join: rows must be vectors, got " + shape_string(shape));
  for (std::size_t c = 1; c < rows.size(); ++c) {
    if (rows[c].shape() != shape) {
      throw ShapeError("join: row " + std::to_string(c) + " has shape " +
                       shape_string(rows[c].shape()) + ", row 0 has " + shape_string(shape));
    }
  }
  const double inv = 1.0 / static_cast<double>(rows.size());

  switch (params.strategy) {
    case JoinStrategy::Average: {
      ad::Var acc = rows[0];
      for (std::size_t c = 1; c < rows.size(); ++c) acc = ad::add(acc, rows[c]);
      return rows.size() == 1 ? acc : ad::affine(acc, inv);
    }
    case JoinStrategy::Max: {
      ad::Var acc = rows[0];
      for (std::size_t c = 1; c < rows.size(); ++c) acc = ad::maximum(acc, rows[c]);
      return acc;
    }
    case JoinStrategy::Weighted: {
      if (params.scale_weights.size() != rows.size()) {
        throw ShapeError("join: weighted join has " + std::to_string(params.scale_weights.size()) +
                         " weight vectors for " + std::to_string(rows.size()) + " scales");
      }
      ad::Var acc = ad::mul(params.scale_weights[0], rows[0]);
      for (std::size_t c = 1; c < rows.size(); ++c) {
        acc = ad::add(acc, ad::mul(params.scale_weights[c], rows[c]));
      }
      return ad::affine(acc, inv);
    }
    case JoinStrategy::Mlp: {
      ad::Var stacked = rows.size() == 1 ? rows[0] : ad::concat(rows);
      ad::Var hidden = ad::sigmoid(
          ad::add(ad::matmul(params.hidden_weights, stacked), params.hidden_bias));
      return ad::sigmoid(ad::matmul(params.output_weights, hidden));
    }
  }
  throw Error("join: unknown strategy");
}

Tensor join(const PredictionMatrix& preds, const JoinParams& params) {
  ad::Tape tape;
  std::vector<ad::Var> rows;
  for (const auto& r : preds.rows) rows.push_back(tape.parameter(r, nullptr));
  JoinVars vars;
  vars.strategy = params.strategy;
  for (const auto& w : params.scale_weights) vars.scale_weights.push_back(tape.parameter(w, nullptr));
  if (params.strategy == JoinStrategy::Mlp) {
    vars.hidden_weights = tape.parameter(params.hidden_weights, nullptr);
    vars.hidden_bias = tape.parameter(params.hidden_bias, nullptr);
    vars.output_weights = tape.parameter(params.output_weights, nullptr);
  }
  return join(vars, rows).value();
}

}  // namespace lsdm
