#ifndef SEGNER_TENSOR_HPP
#define SEGNER_TENSOR_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>

namespace segner {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vec64 = Vec<double>;
using Mat64 = Mat<double>;
using Index = Eigen::Index;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename Derived>
std::string shape_of(const Eigen::EigenBase<Derived>& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

/// W * x + b. Throws DimensionError naming both shapes on mismatch.
template <typename DW, typename DX, typename DB>
Vec<typename DW::Scalar> affine(const Eigen::MatrixBase<DW>& W,
                                const Eigen::MatrixBase<DX>& x,
                                const Eigen::MatrixBase<DB>& b) {
  if (x.cols() != 1 || b.cols() != 1 || W.cols() != x.rows() ||
      W.rows() != b.rows()) {
    throw DimensionError("affine: W is " + shape_of(W) + ", x is " +
                         shape_of(x) + ", b is " + shape_of(b));
  }
  return W * x + b;
}

/// log(sum(exp(v))) with a max shift. Throws on empty input.
template <typename Derived>
typename Derived::Scalar logsumexp(const Eigen::DenseBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() == 0) throw std::invalid_argument("logsumexp: empty input");
  const Scalar top = v.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((v.derived().array() - top).exp().sum());
}

/// param - lr * grad, elementwise.
template <typename DP, typename DG>
typename DP::PlainObject sgd_step(const Eigen::MatrixBase<DP>& param,
                                  const Eigen::MatrixBase<DG>& grad,
                                  typename DP::Scalar lr) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols()) {
    throw DimensionError("sgd_step: param is " + shape_of(param) +
                         ", grad is " + shape_of(grad));
  }
  return param - lr * grad;
}

/// In-place form used by the trainer.
template <typename DP, typename DG>
void sgd_update(Eigen::MatrixBase<DP>& param, const Eigen::MatrixBase<DG>& grad,
                typename DP::Scalar lr) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols()) {
    throw DimensionError("sgd_update: param is " + shape_of(param) +
                         ", grad is " + shape_of(grad));
  }
  param.noalias() -= lr * grad;
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().array().isFinite().all();
}

/// xoshiro256** seeded through splitmix64.
///
/// The four state words are the first four outputs of splitmix64 started at
/// `seed`. Outputs for seed 0 begin 0x99ec5f36cb75f2b4, 0xbf6e1f784956452a,
/// 0x1a5f849d4933e6e0 (see docs/formats.md for the full vectors).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform01();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n) by rejection on the low residue. n > 0.
  std::uint64_t uniform_int(std::uint64_t n);

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

/// Inverted dropout: each entry is 0 with probability `rate`, else 1/(1-rate).
/// One uniform draw per entry, including when rate is 0.
Vec64 dropout_mask(Index n, double rate, Rng& rng);

/// Fills every entry with a uniform draw in [-scale, scale], column-major order.
template <typename Derived>
void fill_uniform(Eigen::DenseBase<Derived>& m, double scale, Rng& rng) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-scale, scale);
}

using ScalarFn = std::function<double(const Vec64&)>;

struct GradCheckResult {
  double max_rel_err = 0.0;
  Index worst_coordinate = -1;
};

/// Central finite differences: max_i |g_i - n_i| / max(1, |g_i|, |n_i|).
/// Throws if f is non-finite at any probe point, naming the coordinate.
GradCheckResult grad_check_detailed(const ScalarFn& f, const Vec64& analytic,
                                    const Vec64& params, double eps);

double grad_check(const ScalarFn& f, const Vec64& analytic, const Vec64& params,
                  double eps);

}  // namespace segner

#endif  // SEGNER_TENSOR_HPP
