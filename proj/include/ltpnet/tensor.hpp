#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ltpnet {

/// Dense row-major real64 array. Rank 1 tensors are vectors, rank 2 are
/// matrices; higher ranks are only used as containers (e.g. N x L x F windows).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor vector(std::initializer_list<double> values);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Matrix view: rank 1 tensors behave as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  std::vector<double>& storage() { return data_; }

  void fill(double value);
  bool all_finite() const;
  std::string shape_string() const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

enum class Activation { sigmoid, tanh, relu };

std::string shape_string(const std::vector<std::size_t>& shape);

/// c = a . b for a (m x k) and b (k x n). Rank 1 operands are treated as rows.
Tensor matmul(const Tensor& a, const Tensor& b);
/// c = a . b^T
Tensor matmul_transposed_b(const Tensor& a, const Tensor& b);
/// c = a^T . b
Tensor matmul_transposed_a(const Tensor& a, const Tensor& b);
/// y = W x for W (m x k), x length k.
Tensor matvec(const Tensor& w, std::span<const double> x);
/// out += W^T g for W (m x k), g length m, out length k.
void matvec_transposed_accumulate(const Tensor& w, std::span<const double> g, std::span<double> out);
/// grad += g x^T (outer product accumulate) for grad (m x k).
void outer_accumulate(Tensor& grad, std::span<const double> g, std::span<const double> x);

Tensor transpose(const Tensor& a);

double sigmoid(double v);
Tensor elementwise_activation(Activation kind, const Tensor& x);

/// Softmax along `axis` (negative counts from the back). Max-subtracted.
Tensor softmax(const Tensor& x, int axis = -1);

inline constexpr double kLayerNormEpsilon = 1e-5;

/// (x - mean) / sqrt(var + epsilon) * gain + bias over the last axis,
/// using population variance.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double epsilon = kLayerNormEpsilon);

// Element-wise helpers; all require equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& a, const Tensor& b);
void axpy_inplace(Tensor& a, double alpha, const Tensor& b);
Tensor scale(const Tensor& a, double s);
/// Adds a bias vector to every row of a matrix.
void add_row_bias(Tensor& m, const Tensor& bias);
/// Accumulates the column sums of m into out.
void column_sum_accumulate(const Tensor& m, Tensor& out);

void check_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace ltpnet
