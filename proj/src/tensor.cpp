#include "lsdm/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>

#include "lsdm/error.hpp"

namespace lsdm {

static_assert(std::endian::native == std::endian::little,
              "tensor serialization assumes a little-endian host");

std::size_t shape_size(const Tensor::Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::ostream& operator<<(std::ostream& out, const Tensor& t) {
  out << shape_string(t.shape()) << '{';
  for (std::size_t i = 0; i < t.size(); ++i) out << (i ? ", " : "") << t[i];
  return out << '}';
}

std::string shape_string(const Tensor::Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_size(shape_)) {
    throw ShapeError("tensor of shape " + shape_string(shape_) + " given " +
                     std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::vector(std::initializer_list<double> v) {
  return Tensor(Shape{v.size()}, std::vector<double>(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> v) {
  return Tensor(Shape{rows, cols}, std::vector<double>(v));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows() on tensor of shape " + shape_string(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols() on tensor of shape " + shape_string(shape_));
  return shape_[1];
}

std::span<double> Tensor::row(std::size_t r) {
  const std::size_t c = cols();
  return std::span<double>(values_).subspan(r * c, c);
}

std::span<const double> Tensor::row(std::size_t r) const {
  const std::size_t c = cols();
  return std::span<const double>(values_).subspan(r * c, c);
}

double Tensor::item() const {
  if (values_.size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_string(shape_));
  }
  return values_[0];
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (shape_ != other.shape_) {
    throw ShapeError("accumulate: lhs " + shape_string(shape_) + " vs rhs " +
                     shape_string(other.shape_));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("tensor stream truncated");
  return v;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
  out.write("LSDT", 4);
  put<std::uint32_t>(out, kTensorFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) put<std::uint64_t>(out, d);
  out.write(reinterpret_cast<const char*>(t.values().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!out) throw Error("failed writing tensor");
}

Tensor read_tensor(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "LSDT") throw Error("bad tensor magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kTensorFormatVersion) {
    throw Error("unsupported tensor format version " + std::to_string(version));
  }
  const auto rank = get<std::uint32_t>(in);
  if (rank > 8) throw Error("implausible tensor rank " + std::to_string(rank));
  Tensor::Shape shape(rank);
  for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(in));
  std::vector<double> values(shape_size(shape));
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!in) throw Error("tensor stream truncated");
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace lsdm
