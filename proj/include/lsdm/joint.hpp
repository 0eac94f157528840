#pragma once

#include <span>
#include <vector>

#include "lsdm/model.hpp"
#include "lsdm/params.hpp"
#include "lsdm/tensor.hpp"

namespace lsdm {

/// Per-scale next-item probability vectors, one row per scale.
struct PredictionMatrix {
  std::vector<Tensor> rows;

  std::size_t num_scales() const noexcept { return rows.size(); }
  std::size_t num_items() const { return rows.empty() ? 0 : rows.front().size(); }
};

/// Combines per-scale predictions into the final score vector.
///   Average   mean over rows
///   Max       elementwise max over rows
///   Weighted  mean over rows of a_c ⊙ p_c
///   Mlp       sigmoid(h · sigmoid(W1 · concat(rows) + b1))
/// The result is a ranking score per item, not renormalized.
ad::Var join(const JoinVars& params, std::span<const ad::Var> rows);

/// Value-level join, for scoring and tests.
Tensor join(const PredictionMatrix& preds, const JoinParams& params);

}  // namespace lsdm
