#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nff {

/// Extents of a rank-3 tensor. Vectors are (1,1,n), matrices (1,m,n) and
/// meta-batched data (MB,TB,n).
struct Shape {
  std::size_t d0 = 0;
  std::size_t d1 = 0;
  std::size_t d2 = 0;

  constexpr std::size_t size() const noexcept { return d0 * d1 * d2; }
  constexpr bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense row-major rank-3 array of doubles.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(Shape shape, double fill = 0.0);
  Tensor3(Shape shape, std::vector<double> data);

  static Tensor3 scalar(double v) { return Tensor3({1, 1, 1}, v); }
  static Tensor3 row(std::span<const double> values);
  static Tensor3 matrix(std::size_t rows, std::size_t cols, std::span<const double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_.d1 + j) * shape_.d2 + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_.d1 + j) * shape_.d2 + k];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& vec() const noexcept { return data_; }

  double item() const;
  void fill(double v);
  /// Same data, new extents (product must match).
  Tensor3 reshaped(Shape shape) const&;
  Tensor3 reshaped(Shape shape) &&;

  bool operator==(const Tensor3&) const = default;

 private:
  Shape shape_{};
  std::vector<double> data_;
};

/// Throws NumericError naming `context` and the first offending index.
void assert_finite(const Tensor3& t, std::string_view context);
bool all_finite(const Tensor3& t) noexcept;
double max_abs_diff(const Tensor3& a, const Tensor3& b);

/// Result extents of an elementwise op where each dim is equal or 1.
Shape broadcast_shape(const Shape& a, const Shape& b);

namespace kernels {

/// out[m] = a[m] * b[m]; a d0 or b d0 may be 1 and broadcast.
Tensor3 matmul(const Tensor3& a, const Tensor3& b);
/// Adjoints of matmul; results have the (possibly broadcast) input shapes.
Tensor3 matmul_grad_a(const Tensor3& grad_out, const Tensor3& b, const Shape& a_shape);
Tensor3 matmul_grad_b(const Tensor3& a, const Tensor3& grad_out, const Shape& b_shape);

/// Sum a full-shape gradient down to a broadcast operand's shape.
Tensor3 reduce_to(const Tensor3& grad, const Shape& target);

}  // namespace kernels

}  // namespace nff
