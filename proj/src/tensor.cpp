#include "nff/tensor.hpp"

#include <Eigen/Core>

#include <cmath>
#include <sstream>
#include <utility>

#include "nff/error.hpp"

namespace nff {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;
}  // namespace

std::string Shape::str() const {
  std::ostringstream os;
  os << '(' << d0 << ',' << d1 << ',' << d2 << ')';
  return os.str();
}

Tensor3::Tensor3(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Tensor3::Tensor3(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_.str());
  }
}

Tensor3 Tensor3::row(std::span<const double> values) {
  return Tensor3({1, 1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

Tensor3 Tensor3::matrix(std::size_t rows, std::size_t cols, std::span<const double> values) {
  return Tensor3({1, rows, cols}, std::vector<double>(values.begin(), values.end()));
}

double Tensor3::item() const {
  if (data_.size() != 1) {
    throw ContractError("item() on non-scalar tensor of shape " + shape_.str());
  }
  return data_[0];
}

void Tensor3::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor3 Tensor3::reshaped(Shape shape) const& {
  Tensor3 copy = *this;
  return std::move(copy).reshaped(shape);
}

Tensor3 Tensor3::reshaped(Shape shape) && {
  if (shape.size() != data_.size()) {
    throw DimensionError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  shape_ = shape;
  return std::move(*this);
}

bool all_finite(const Tensor3& t) noexcept {
  for (double v : t.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void assert_finite(const Tensor3& t, std::string_view context) {
  const auto d = t.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i])) {
      std::ostringstream os;
      os << context << ": non-finite value " << d[i] << " at flat index " << i << " of tensor "
         << t.shape().str();
      throw NumericError(os.str());
    }
  }
}

double max_abs_diff(const Tensor3& a, const Tensor3& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_diff: " + a.shape().str() + " vs " + b.shape().str());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

namespace {

std::size_t bdim(std::size_t a, std::size_t b, const Shape& sa, const Shape& sb) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  throw DimensionError("incompatible broadcast shapes " + sa.str() + " and " + sb.str());
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
  return {bdim(a.d0, b.d0, a, b), bdim(a.d1, b.d1, a, b), bdim(a.d2, b.d2, a, b)};
}

namespace kernels {

namespace {

std::size_t batch_extent(const Shape& a, const Shape& b) {
  if (a.d0 == b.d0 || b.d0 == 1) return a.d0;
  if (a.d0 == 1) return b.d0;
  throw DimensionError("matmul_batched: batch extents differ, a=" + a.str() + " b=" + b.str());
}

}  // namespace

Tensor3 matmul(const Tensor3& a, const Tensor3& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.d2 != sb.d1) {
    throw DimensionError("matmul_batched: inner extents differ, a=" + sa.str() + " b=" + sb.str());
  }
  const std::size_t mb = batch_extent(sa, sb);
  const auto rows = static_cast<Eigen::Index>(sa.d1), inner = static_cast<Eigen::Index>(sa.d2),
             cols = static_cast<Eigen::Index>(sb.d2);
  Tensor3 out({mb, sa.d1, sb.d2});
  if (out.empty()) return out;
  if (sb.d0 == 1 && sa.d0 == mb) {
    // Shared right operand: one (mb*rows, inner) x (inner, cols) product.
    MatMap(out.data().data(), rows * static_cast<Eigen::Index>(mb), cols).noalias() =
        CMatMap(a.data().data(), rows * static_cast<Eigen::Index>(mb), inner) * CMatMap(b.data().data(), inner, cols);
    return out;
  }
  for (std::size_t m = 0; m < mb; ++m) {
    const double* am = a.data().data() + (sa.d0 == 1 ? 0 : m) * sa.d1 * sa.d2;
    const double* bm = b.data().data() + (sb.d0 == 1 ? 0 : m) * sb.d1 * sb.d2;
    MatMap(out.data().data() + m * sa.d1 * sb.d2, rows, cols).noalias() =
        CMatMap(am, rows, inner) * CMatMap(bm, inner, cols);
  }
  return out;
}

Tensor3 matmul_grad_a(const Tensor3& grad_out, const Tensor3& b, const Shape& a_shape) {
  const Shape& sg = grad_out.shape();
  const Shape& sb = b.shape();
  const auto rows = static_cast<Eigen::Index>(sg.d1), inner = static_cast<Eigen::Index>(sb.d1),
             cols = static_cast<Eigen::Index>(sb.d2);
  Tensor3 ga(a_shape);
  if (ga.empty() || grad_out.empty()) return ga;
  if (sb.d0 == 1 && a_shape.d0 == sg.d0) {
    const auto all = rows * static_cast<Eigen::Index>(sg.d0);
    MatMap(ga.data().data(), all, inner).noalias() =
        CMatMap(grad_out.data().data(), all, cols) * CMatMap(b.data().data(), inner, cols).transpose();
    return ga;
  }
  for (std::size_t m = 0; m < sg.d0; ++m) {
    const double* gm = grad_out.data().data() + m * sg.d1 * sg.d2;
    const double* bm = b.data().data() + (sb.d0 == 1 ? 0 : m) * sb.d1 * sb.d2;
    MatMap(ga.data().data() + (a_shape.d0 == 1 ? 0 : m) * a_shape.d1 * a_shape.d2, rows, inner).noalias() +=
        CMatMap(gm, rows, cols) * CMatMap(bm, inner, cols).transpose();
  }
  return ga;
}

Tensor3 matmul_grad_b(const Tensor3& a, const Tensor3& grad_out, const Shape& b_shape) {
  const Shape& sg = grad_out.shape();
  const Shape& sa = a.shape();
  const auto rows = static_cast<Eigen::Index>(sg.d1), inner = static_cast<Eigen::Index>(sa.d2),
             cols = static_cast<Eigen::Index>(sg.d2);
  Tensor3 gb(b_shape);
  if (gb.empty() || grad_out.empty()) return gb;
  if (b_shape.d0 == 1 && sa.d0 == sg.d0) {
    const auto all = rows * static_cast<Eigen::Index>(sg.d0);
    MatMap(gb.data().data(), inner, cols).noalias() =
        CMatMap(a.data().data(), all, inner).transpose() * CMatMap(grad_out.data().data(), all, cols);
    return gb;
  }
  for (std::size_t m = 0; m < sg.d0; ++m) {
    const double* gm = grad_out.data().data() + m * sg.d1 * sg.d2;
    const double* am = a.data().data() + (sa.d0 == 1 ? 0 : m) * sa.d1 * sa.d2;
    MatMap(gb.data().data() + (b_shape.d0 == 1 ? 0 : m) * b_shape.d1 * b_shape.d2, inner, cols).noalias() +=
        CMatMap(am, rows, inner).transpose() * CMatMap(gm, rows, cols);
  }
  return gb;
}

Tensor3 reduce_to(const Tensor3& grad, const Shape& target) {
  const Shape& sg = grad.shape();
  if (sg == target) return grad;
  if ((target.d0 != sg.d0 && target.d0 != 1) || (target.d1 != sg.d1 && target.d1 != 1) ||
      (target.d2 != sg.d2 && target.d2 != 1)) {
    throw DimensionError("cannot reduce gradient " + sg.str() + " to " + target.str());
  }
  Tensor3 out(target);
  for (std::size_t i = 0; i < sg.d0; ++i) {
    const std::size_t ti = target.d0 == 1 ? 0 : i;
    for (std::size_t j = 0; j < sg.d1; ++j) {
      const std::size_t tj = target.d1 == 1 ? 0 : j;
      for (std::size_t k = 0; k < sg.d2; ++k) {
        const std::size_t tk = target.d2 == 1 ? 0 : k;
        out(ti, tj, tk) += grad(i, j, k);
      }
    }
  }
  return out;
}

}  // namespace kernels

}  // namespace nff
