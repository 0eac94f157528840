#include "lsdm/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "lsdm/error.hpp"

namespace lsdm {

namespace {

double evaluate(const ScalarGraph& f, std::span<const Tensor> params) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(tape.constant(p));
  return f(tape, leaves).value().item();
}

}  // namespace

std::vector<Tensor> reverse_gradients(const ScalarGraph& f, std::span<const Tensor> params) {
  ad::Tape tape;
  std::vector<Tensor> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.emplace_back(p.shape(), 0.0);
  std::vector<ad::Var> leaves;
  for (std::size_t i = 0; i < params.size(); ++i) {
    leaves.push_back(tape.parameter(params[i], &grads[i]));
  }
  ad::Var out = f(tape, leaves);
  tape.backward(out);
  return grads;
}

GradCheckReport grad_check(const ScalarGraph& f, std::span<const Tensor> params,
                           const GradCheckOptions& options) {
  if (!(options.eps >= 1e-7 && options.eps <= 1e-3)) {
    throw InvalidArgument("grad_check: eps must lie in [1e-7, 1e-3]");
  }
  GradCheckReport report;
  std::vector<Tensor> analytic;
  try {
    analytic = reverse_gradients(f, params);
  } catch (const NumericError& e) {
    report.failure = std::string("reverse pass: ") + e.what();
    return report;
  }

  std::vector<Tensor> work(params.begin(), params.end());
  for (std::size_t t = 0; t < work.size(); ++t) {
    for (std::size_t i = 0; i < work[t].size(); ++i) {
      const double a = analytic[t][i];
      const double x0 = work[t][i];
      double plus = 0.0, minus = 0.0;
      try {
        work[t][i] = x0 + options.eps;
        plus = evaluate(f, work);
        work[t][i] = x0 - options.eps;
        minus = evaluate(f, work);
      } catch (const NumericError& e) {
        report.failure = "tensor " + std::to_string(t) + " coordinate " + std::to_string(i) +
                         ": " + e.what();
        return report;
      }
      work[t][i] = x0;
      const double numeric = (plus - minus) / (2.0 * options.eps);
      if (!std::isfinite(numeric) || !std::isfinite(a)) {
        report.failure = "tensor " + std::to_string(t) + " coordinate " + std::to_string(i) +
                         ": non-finite gradient";
        return report;
      }
      const double abs_err = std::abs(a - numeric);
      const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      const double rel = abs_err / denom;
      report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
      if (rel > report.max_relative_error || report.coordinates_checked == 0) {
        report.max_relative_error = std::max(rel, report.max_relative_error);
        report.worst_tensor = t;
        report.worst_index = i;
      }
      ++report.coordinates_checked;
    }
  }
  report.passed = report.max_relative_error <= options.tol;
  return report;
}

}  // namespace lsdm
