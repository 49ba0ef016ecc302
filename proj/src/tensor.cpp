#include "tlab/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "tlab/errors.hpp"

namespace tlab {

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto d : shape_) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_string(shape_));
  }
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_string(shape_));
  }
  if (data_.size() != shape_size(shape_)) {
    throw DimensionError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(n * m);
  for (const auto& r : rows) {
    if (r.size() != m) throw DimensionError("ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({n, m}, std::move(data));
}

std::size_t Tensor::rows() const {
  if (shape_.empty()) throw DimensionError("rows() of a rank-0 tensor");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.empty()) return 0;
  return shape_.size() == 1 ? 1 : data_.size() / shape_[0];
}

std::span<double> Tensor::row(std::size_t r) {
  const std::size_t c = cols();
  return std::span<double>(data_).subspan(r * c, c);
}

std::span<const double> Tensor::row(std::size_t r) const {
  const std::size_t c = cols();
  return std::span<const double>(data_).subspan(r * c, c);
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {

void require_matrix(const Tensor& t, const char* name) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(name) + " must be a matrix, got " + shape_string(t.shape()));
  }
}

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": inner dimensions disagree for " +
                       shape_string(a.shape()) + " and " + shape_string(b.shape()));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul lhs");
  require_matrix(b, "matmul rhs");
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  if (b.shape()[0] != k) mismatch("matmul", a, b);
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    double* o = &out(i, 0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      const double* br = b.data().data() + p * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

Tensor matmul_bt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_bt lhs");
  require_matrix(b, "matmul_bt rhs");
  if (b.shape()[1] != a.shape()[1]) mismatch("matmul_bt", a, b);
  // The row-streaming kernel in matmul vectorizes; a dot-product loop does not.
  return matmul(a, transpose(b));
}

Tensor matmul_at(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_at lhs");
  require_matrix(b, "matmul_at rhs");
  const std::size_t k = a.shape()[0], n = a.shape()[1], m = b.shape()[1];
  if (b.shape()[0] != k) mismatch("matmul_at", a, b);
  Tensor out({n, m});
  for (std::size_t p = 0; p < k; ++p) {
    const double* ar = a.data().data() + p * n;
    const double* br = b.data().data() + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double av = ar[i];
      if (av == 0.0) continue;
      double* o = &out(i, 0);
      for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t n = a.shape()[0], m = a.shape()[1];
  Tensor out({m, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out(j, i) = a(i, j);
  return out;
}

Stats reduce_stats(const Tensor& t) {
  if (t.empty()) throw ArgumentError("reduce_stats of an empty tensor");
  const double n = static_cast<double>(t.size());
  double sum = 0.0;
  for (double v : t.values()) sum += v;
  const double mean = sum / n;
  // Second pass about the mean for the variance; energy from its own sum.
  double sq_dev = 0.0, sq = 0.0;
  for (double v : t.values()) {
    const double d = v - mean;
    sq_dev += d * d;
    sq += v * v;
  }
  return Stats{mean, sq_dev / n, sq / n};
}

double mean_square(const Tensor& t) {
  if (t.empty()) return 0.0;
  double sq = 0.0;
  for (double v : t.values()) sq += v * v;
  return sq / static_cast<double>(t.size());
}

}  // namespace tlab
