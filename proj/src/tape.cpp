#include "lsdm/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lsdm/error.hpp"

namespace lsdm::ad {

const Tensor& Var::value() const { return tape->value(id); }
const Tensor& Var::grad() const { return tape->grad(id); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::parameter(const Tensor& value, Tensor* grad_sink) {
  if (grad_sink && !grad_sink->same_shape(value)) {
    throw ShapeError("parameter sink shape " + shape_string(grad_sink->shape()) +
                     " differs from value shape " + shape_string(value.shape()));
  }
  Node n;
  n.external = &value;
  n.sink = grad_sink;
  n.requires_grad = grad_sink != nullptr;
  return push(std::move(n));
}

Var Tape::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::record(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
                 BackwardFn backward) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(std::string_view op, Tensor value, std::span<const Var> inputs,
                 BackwardFn backward) {
  if (!value.all_finite()) {
    throw NumericError(std::string(op) + " produced a non-finite value");
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(), [this](const Var& v) {
    return nodes_[v.id].requires_grad;
  });
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

const Tensor& Tape::value(std::size_t id) const { return node_value(nodes_.at(id)); }

const Tensor& Tape::grad(std::size_t id) const { return nodes_.at(id).grad; }

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0 && node_value(n).size() != 0) {
    n.grad = Tensor(node_value(n).shape(), 0.0);
  }
  return n.grad;
}

void Tape::backward(Var output, const std::function<void(std::size_t)>& on_visit) {
  if (output.tape != this) throw Error("backward: variable belongs to another tape");
  if (value(output.id).size() != 1) {
    throw ShapeError("backward needs a scalar output, got " +
                     shape_string(value(output.id).shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  grad_buffer(output.id).fill(1.0);

  for (std::size_t i = output.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (on_visit) on_visit(i);
    if (n.backward) n.backward(*this, i);
    if (n.sink) *n.sink += n.grad;
  }
}

namespace {

[[noreturn]] void shape_mismatch(std::string_view op, const Var& a, const Var& b) {
  throw ShapeError(std::string(op) + ": operand a " + shape_string(a.shape()) +
                   " incompatible with operand b " + shape_string(b.shape()));
}

void require_rank(std::string_view op, const Var& a, std::size_t rank) {
  if (a.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     " operand, got " + shape_string(a.shape()));
  }
}

template <typename F>
Tensor map(const Tensor& in, F f) {
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return out;
}

}  // namespace

Var matmul(Var a, Var b) {
  require_rank("matmul", a, 2);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const std::size_t r = A.rows(), c = A.cols();
  if (B.rank() == 1) {
    if (B.size() != c) shape_mismatch("matmul", a, b);
    Tensor out(Tensor::Shape{r});
    for (std::size_t i = 0; i < r; ++i) {
      const double* row = &A[i * c];
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) s += row[j] * B[j];
      out[i] = s;
    }
    return a.tape->record("matmul", std::move(out), {a, b}, [a, b, r, c](Tape& t, std::size_t self) {
      const Tensor& g = t.grad(self);
      const Tensor& A = t.value(a.id);
      const Tensor& B = t.value(b.id);
      if (t.requires_grad(a.id)) {
        Tensor& gA = t.grad_buffer(a.id);
        for (std::size_t i = 0; i < r; ++i) {
          const double gi = g[i];
          if (gi == 0.0) continue;
          double* row = &gA[i * c];
          for (std::size_t j = 0; j < c; ++j) row[j] += gi * B[j];
        }
      }
      if (t.requires_grad(b.id)) {
        Tensor& gB = t.grad_buffer(b.id);
        for (std::size_t i = 0; i < r; ++i) {
          const double gi = g[i];
          const double* row = &A[i * c];
          for (std::size_t j = 0; j < c; ++j) gB[j] += gi * row[j];
        }
      }
    });
  }
  if (B.rank() != 2 || B.rows() != c) shape_mismatch("matmul", a, b);
  const std::size_t k = B.cols();
  Tensor out(Tensor::Shape{r, k});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double aij = A[i * c + j];
      for (std::size_t l = 0; l < k; ++l) out[i * k + l] += aij * B[j * k + l];
    }
  return a.tape->record("matmul", std::move(out), {a, b}, [a, b, r, c, k](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& A = t.value(a.id);
    const Tensor& B = t.value(b.id);
    if (t.requires_grad(a.id)) {
      Tensor& gA = t.grad_buffer(a.id);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
          double s = 0.0;
          for (std::size_t l = 0; l < k; ++l) s += g[i * k + l] * B[j * k + l];
          gA[i * c + j] += s;
        }
    }
    if (t.requires_grad(b.id)) {
      Tensor& gB = t.grad_buffer(b.id);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
          const double aij = A[i * c + j];
          for (std::size_t l = 0; l < k; ++l) gB[j * k + l] += aij * g[i * k + l];
        }
    }
  });
}

namespace {

template <typename Fwd, typename DA, typename DB>
Var binary(std::string_view op, Var a, Var b, Fwd fwd, DA da, DB db) {
  if (!a.value().same_shape(b.value())) shape_mismatch(op, a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  Tensor out(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = fwd(A[i], B[i]);
  return a.tape->record(op, std::move(out), {a, b}, [a, b, da, db](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& A = t.value(a.id);
    const Tensor& B = t.value(b.id);
    if (t.requires_grad(a.id)) {
      Tensor& gA = t.grad_buffer(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) gA[i] += g[i] * da(A[i], B[i]);
    }
    if (t.requires_grad(b.id)) {
      Tensor& gB = t.grad_buffer(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) gB[i] += g[i] * db(A[i], B[i]);
    }
  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var maximum(Var a, Var b) {
  return binary(
      "maximum", a, b, [](double x, double y) { return x >= y ? x : y; },
      [](double x, double y) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y) { return x >= y ? 0.0 : 1.0; });
}

Var affine(Var a, double alpha, double beta) {
  Tensor out = map(a.value(), [=](double x) { return alpha * x + beta; });
  return a.tape->record("affine", std::move(out), {a}, [a, alpha](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gA = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) gA[i] += alpha * g[i];
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape->record("sum", Tensor::scalar(s), {a}, [a](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    Tensor& gA = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < gA.size(); ++i) gA[i] += g;
  });
}

Var sigmoid(Var a) {
  Tensor out = map(a.value(), [](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return a.tape->record("sigmoid", std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gA = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) gA[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh(Var a) {
  Tensor out = map(a.value(), [](double x) { return std::tanh(x); });
  return a.tape->record("tanh", std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gA = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) gA[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var softmax(Var a) {
  require_rank("softmax", a, 1);
  const Tensor& x = a.value();
  if (x.size() == 0) throw ShapeError("softmax: empty operand");
  const double mx = *std::max_element(x.values().begin(), x.values().end());
  Tensor out(x.shape());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) z += (out[i] = std::exp(x[i] - mx));
  for (std::size_t i = 0; i < x.size(); ++i) out[i] /= z;
  return a.tape->record("softmax", std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    double dot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y[i];
    Tensor& gA = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) gA[i] += y[i] * (g[i] - dot);
  });
}

Var log(Var a) {
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0)) {
      throw NumericError("log: non-positive input " + std::to_string(x[i]) + " at index " +
                         std::to_string(i));
    }
  }
  Tensor out = map(x, [](double v) { return std::log(v); });
  return a.tape->record("log", std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& x = t.value(a.id);
    Tensor& gA = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) gA[i] += g[i] / x[i];
  });
}

Var clip(Var a, double lo, double hi) {
  Tensor out = map(a.value(), [=](double x) { return std::clamp(x, lo, hi); });
  return a.tape->record("clip", std::move(out), {a}, [a, lo, hi](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& x = t.value(a.id);
    Tensor& gA = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] >= lo && x[i] <= hi) gA[i] += g[i];
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  Tape* tape = parts.front().tape;
  std::vector<double> values;
  std::vector<std::size_t> offsets;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    if (v.rank() != 1) {
      throw ShapeError("concat: operand " + std::to_string(p) + " has shape " +
                       shape_string(v.shape()) + ", expected rank 1");
    }
    offsets.push_back(values.size());
    values.insert(values.end(), v.values().begin(), v.values().end());
  }
  const std::size_t n = values.size();
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape->record("concat", Tensor(Tensor::Shape{n}, std::move(values)), parts,
                      [inputs, offsets](Tape& t, std::size_t self) {
                        const Tensor& g = t.grad(self);
                        for (std::size_t p = 0; p < inputs.size(); ++p) {
                          if (!t.requires_grad(inputs[p].id)) continue;
                          Tensor& gp = t.grad_buffer(inputs[p].id);
                          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offsets[p] + i];
                        }
                      });
}

Var slice(Var a, std::size_t begin, std::size_t len) {
  require_rank("slice", a, 1);
  const Tensor& x = a.value();
  if (begin + len > x.size()) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + len) + ") exceeds operand " + shape_string(x.shape()));
  }
  std::vector<double> v(x.values().begin() + static_cast<std::ptrdiff_t>(begin),
                        x.values().begin() + static_cast<std::ptrdiff_t>(begin + len));
  return a.tape->record("slice", Tensor(Tensor::Shape{len}, std::move(v)), {a},
                        [a, begin](Tape& t, std::size_t self) {
                          const Tensor& g = t.grad(self);
                          Tensor& gA = t.grad_buffer(a.id);
                          for (std::size_t i = 0; i < g.size(); ++i) gA[begin + i] += g[i];
                        });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  require_rank("slice_rows", a, 2);
  const Tensor& x = a.value();
  if (begin + count > x.rows()) {
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") exceed operand " +
                     shape_string(x.shape()));
  }
  const std::size_t c = x.cols();
  std::vector<double> v(x.values().begin() + static_cast<std::ptrdiff_t>(begin * c),
                        x.values().begin() + static_cast<std::ptrdiff_t>((begin + count) * c));
  return a.tape->record("slice_rows", Tensor(Tensor::Shape{count, c}, std::move(v)), {a},
                        [a, begin, c](Tape& t, std::size_t self) {
                          const Tensor& g = t.grad(self);
                          Tensor& gA = t.grad_buffer(a.id);
                          for (std::size_t i = 0; i < g.size(); ++i) gA[begin * c + i] += g[i];
                        });
}

Var pad(Var a, std::size_t total) {
  require_rank("pad", a, 1);
  const Tensor& x = a.value();
  if (total < x.size()) {
    throw ShapeError("pad: target length " + std::to_string(total) + " shorter than operand " +
                     shape_string(x.shape()));
  }
  Tensor out(Tensor::Shape{total});
  std::copy(x.values().begin(), x.values().end(), out.values().begin());
  return a.tape->record("pad", std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gA = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < gA.size(); ++i) gA[i] += g[i];
  });
}

Var reshape(Var a, Tensor::Shape shape) {
  const Tensor& x = a.value();
  if (shape_size(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_string(x.shape()) + " as " +
                     shape_string(shape));
  }
  std::vector<double> v(x.values().begin(), x.values().end());
  return a.tape->record("reshape", Tensor(std::move(shape), std::move(v)), {a},
                        [a](Tape& t, std::size_t self) {
                          const Tensor& g = t.grad(self);
                          Tensor& gA = t.grad_buffer(a.id);
                          for (std::size_t i = 0; i < g.size(); ++i) gA[i] += g[i];
                        });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  require_rank("gather_rows", a, 2);
  const Tensor& x = a.value();
  const std::size_t c = x.cols();
  Tensor out(Tensor::Shape{rows.size(), c});
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= x.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[k]) + " out of range for " +
                       shape_string(x.shape()));
    }
    std::copy_n(&x[rows[k] * c], c, &out[k * c]);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return a.tape->record("gather_rows", std::move(out), {a},
                        [a, idx, c](Tape& t, std::size_t self) {
                          const Tensor& g = t.grad(self);
                          Tensor& gA = t.grad_buffer(a.id);
                          for (std::size_t k = 0; k < idx.size(); ++k)
                            for (std::size_t j = 0; j < c; ++j) gA[idx[k] * c + j] += g[k * c + j];
                        });
}

}  // namespace lsdm::ad
