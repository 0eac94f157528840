#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lsdm/tape.hpp"
#include "lsdm/tensor.hpp"

namespace lsdm {

/// Builds a scalar-valued graph on `tape` from leaves holding the parameters.
using ScalarGraph = std::function<ad::Var(ad::Tape& tape, std::span<const ad::Var> params)>;

struct GradCheckReport {
  bool passed = false;
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  /// (tensor index, flat coordinate) of the worst relative error.
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  std::size_t coordinates_checked = 0;
  /// Set when a non-finite value was hit; names the offending coordinate.
  std::optional<std::string> failure;
};

struct GradCheckOptions {
  double eps = 1e-6;
  double tol = 1e-5;
  /// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor);
  /// the floor keeps gradients near zero from turning rounding noise into
  /// huge relative errors.
  double denominator_floor = 1e-6;
};

/// Compares reverse-mode gradients of `f` at `params` against central finite
/// differences (f(x+eps) - f(x-eps)) / (2 eps), coordinate by coordinate.
GradCheckReport grad_check(const ScalarGraph& f, std::span<const Tensor> params,
                           const GradCheckOptions& options = {});

/// Reverse-mode gradients only, one tensor per parameter.
std::vector<Tensor> reverse_gradients(const ScalarGraph& f, std::span<const Tensor> params);

}  // namespace lsdm
