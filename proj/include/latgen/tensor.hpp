#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace latgen {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Dense row-major 64-bit tensor. Vectors are 1 x n, scalars 1 x 1.
using Tensor = MatrixX<double>;
using RowVector = RowVectorX<double>;
using Index = Eigen::Index;

class DimensionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Violated precondition of a numeric routine (empty input, bad length).
class ContractError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

inline std::string shape_string(Index rows, Index cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

template <typename Derived>
std::string shape_string(const Eigen::DenseBase<Derived>& m) {
  return shape_string(m.rows(), m.cols());
}

inline void require_shape(bool ok, const char* op, Index r1, Index c1, Index r2, Index c2) {
  if (!ok) {
    throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(r1, c1) +
                         " and " + shape_string(r2, c2));
  }
}

/// Overflow-safe log(sum(exp(v))) over every coefficient of v.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() == 0) throw ContractError("log_sum_exp: empty input");
  const Scalar m = v.maxCoeff();
  if (m == -std::numeric_limits<Scalar>::infinity()) return m;
  Scalar acc = 0;
  for (Index i = 0; i < v.rows(); ++i)
    for (Index j = 0; j < v.cols(); ++j) acc += std::exp(v(i, j) - m);
  return m + std::log(acc);
}

template <typename Derived>
MatrixX<typename Derived::Scalar> log_softmax(const Eigen::DenseBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out = v;
  out.array() -= log_sum_exp(v);
  return out;
}

/// Row-wise log-softmax: each row is normalized independently.
template <typename Derived>
MatrixX<typename Derived::Scalar> log_softmax_rows(const Eigen::DenseBase<Derived>& m) {
  MatrixX<typename Derived::Scalar> out = m;
  for (Index r = 0; r < out.rows(); ++r) out.row(r).array() -= log_sum_exp(out.row(r));
  return out;
}

/// Index of the largest coefficient; the lowest index wins ties.
template <typename Derived>
Index argmax(const Eigen::DenseBase<Derived>& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

inline bool all_finite(const Tensor& t) { return t.allFinite(); }

}  // namespace latgen
