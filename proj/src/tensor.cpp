#include "ltpnet/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "ltpnet/errors.hpp"

namespace ltpnet {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 1 && t.rank() != 2) {
    throw ShapeError(std::string(what) + ": expected a matrix, got " + t.shape_string());
  }
}

}  // namespace

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {
  for (auto extent : shape_) {
    if (extent == 0) throw ShapeError("tensor extents must be positive: " + ltpnet::shape_string(shape_));
  }
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (product(shape_) != data_.size()) {
    throw ShapeError("shape " + ltpnet::shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return vector(std::vector<double>(values));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

std::size_t Tensor::rows() const {
  if (shape_.empty()) return 0;
  return shape_.size() == 1 ? 1 : shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.empty()) return 0;
  return shape_.size() == 1 ? shape_[0] : data_.size() / shape_[0];
}

std::span<double> Tensor::row(std::size_t r) {
  const std::size_t c = cols();
  return std::span<double>(data_).subspan(r * c, c);
}

std::span<const double> Tensor::row(std::size_t r) const {
  const std::size_t c = cols();
  return std::span<const double>(data_).subspan(r * c, c);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const { return ltpnet::shape_string(shape_); }

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + a.shape_string() + " . " +
                     b.shape_string());
  }
  Tensor c({a.rows(), b.cols()});
  MutMap(c.data().data(), static_cast<Eigen::Index>(c.rows()), static_cast<Eigen::Index>(c.cols()))
      .noalias() = as_matrix(a) * as_matrix(b);
  return c;
}

Tensor matmul_transposed_b(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_transposed_b");
  require_matrix(b, "matmul_transposed_b");
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_transposed_b: inner dimensions differ, " + a.shape_string() +
                     " . " + b.shape_string() + "^T");
  }
  Tensor c({a.rows(), b.rows()});
  MutMap(c.data().data(), static_cast<Eigen::Index>(c.rows()), static_cast<Eigen::Index>(c.cols()))
      .noalias() = as_matrix(a) * as_matrix(b).transpose();
  return c;
}

Tensor matmul_transposed_a(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_transposed_a");
  require_matrix(b, "matmul_transposed_a");
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_transposed_a: inner dimensions differ, " + a.shape_string() +
                     "^T . " + b.shape_string());
  }
  Tensor c({a.cols(), b.cols()});
  MutMap(c.data().data(), static_cast<Eigen::Index>(c.rows()), static_cast<Eigen::Index>(c.cols()))
      .noalias() = as_matrix(a).transpose() * as_matrix(b);
  return c;
}

Tensor matvec(const Tensor& w, std::span<const double> x) {
  require_matrix(w, "matvec");
  if (w.cols() != x.size()) {
    throw ShapeError("matvec: " + w.shape_string() + " times vector of length " +
                     std::to_string(x.size()));
  }
  Tensor y({w.rows()});
  Eigen::Map<Eigen::VectorXd>(y.data().data(), static_cast<Eigen::Index>(w.rows())).noalias() =
      as_matrix(w) *
      Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  return y;
}

void matvec_transposed_accumulate(const Tensor& w, std::span<const double> g,
                                  std::span<double> out) {
  if (w.rows() != g.size() || w.cols() != out.size()) {
    throw ShapeError("matvec_transposed_accumulate: shape mismatch for " + w.shape_string());
  }
  Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size())).noalias() +=
      as_matrix(w).transpose() *
      Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
}

void outer_accumulate(Tensor& grad, std::span<const double> g, std::span<const double> x) {
  if (grad.rows() != g.size() || grad.cols() != x.size()) {
    throw ShapeError("outer_accumulate: shape mismatch for " + grad.shape_string());
  }
  const std::size_t cols = x.size();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double gi = g[i];
    if (gi == 0.0) continue;
    double* row = grad.data().data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) row[j] += gi * x[j];
  }
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  Tensor t({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

double sigmoid(double v) {
  // Split by sign so exp never overflows.
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

Tensor elementwise_activation(Activation kind, const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data()) {
    switch (kind) {
      case Activation::sigmoid: v = sigmoid(v); break;
      case Activation::tanh: v = std::tanh(v); break;
      case Activation::relu: v = v > 0.0 ? v : 0.0; break;
    }
  }
  return y;
}

Tensor softmax(const Tensor& x, int axis) {
  const int rank = static_cast<int>(x.rank());
  if (rank == 0) return x;
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw ShapeError("softmax: axis out of range for " + x.shape_string());

  const auto& shape = x.shape();
  std::size_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= shape[d];
  for (int d = axis + 1; d < rank; ++d) inner *= shape[d];
  const std::size_t n = shape[axis];

  Tensor y = x;
  auto data = y.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = data[base];
      for (std::size_t k = 1; k < n; ++k) mx = std::max(mx, data[base + k * inner]);
      double sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        double& v = data[base + k * inner];
        v = std::exp(v - mx);
        sum += v;
      }
      for (std::size_t k = 0; k < n; ++k) data[base + k * inner] /= sum;
    }
  }
  return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double epsilon) {
  const std::size_t width = x.rank() == 0 ? 0 : x.shape().back();
  if (gain.size() != width || bias.size() != width) {
    throw ShapeError("layer_norm: gain/bias " + gain.shape_string() + "/" + bias.shape_string() +
                     " do not match feature axis of " + x.shape_string());
  }
  Tensor y = x;
  auto data = y.data();
  const std::size_t slices = width ? x.size() / width : 0;
  for (std::size_t s = 0; s < slices; ++s) {
    double* v = data.data() + s * width;
    double mean = 0.0;
    for (std::size_t j = 0; j < width; ++j) mean += v[j];
    mean /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t j = 0; j < width; ++j) var += (v[j] - mean) * (v[j] - mean);
    var /= static_cast<double>(width);
    const double inv_std = 1.0 / std::sqrt(var + epsilon);
    for (std::size_t j = 0; j < width; ++j) v[j] = (v[j] - mean) * inv_std * gain[j] + bias[j];
  }
  return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor c = a;
  add_inplace(c, b);
  return c;
}

void add_inplace(Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) ad[i] += bd[i];
}

void axpy_inplace(Tensor& a, double alpha, const Tensor& b) {
  check_same_shape(a, b, "axpy");
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) ad[i] += alpha * bd[i];
}

Tensor scale(const Tensor& a, double s) {
  Tensor c = a;
  for (double& v : c.data()) v *= s;
  return c;
}

void add_row_bias(Tensor& m, const Tensor& bias) {
  if (bias.size() != m.cols()) {
    throw ShapeError("add_row_bias: bias " + bias.shape_string() + " vs matrix " + m.shape_string());
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias[j];
  }
}

void column_sum_accumulate(const Tensor& m, Tensor& out) {
  if (out.size() != m.cols()) {
    throw ShapeError("column_sum_accumulate: " + m.shape_string() + " into " + out.shape_string());
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) out[j] += row[j];
  }
}

}  // namespace ltpnet
