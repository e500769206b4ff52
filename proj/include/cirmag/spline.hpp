#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace cirmag {

/// Natural cubic spline on a uniform grid x_i = x0 + i h.
template <typename Scalar>
class UniformCubicSpline {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  UniformCubicSpline() = default;

  UniformCubicSpline(Scalar x0, Scalar h, Vector values)
      : x0_(x0), h_(h), y_(std::move(values)), m_(Vector::Zero(y_.size())) {
    const Eigen::Index n = y_.size();
    if (n < 2) throw std::invalid_argument("spline needs at least two nodes");
    if (!(h > Scalar(0))) throw std::invalid_argument("spline step must be positive");
    if (n == 2) return;
    // Tridiagonal system for the interior second derivatives (Thomas algorithm).
    const Eigen::Index k = n - 2;
    Vector c_prime(k), d_prime(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const Scalar rhs = Scalar(6) * (y_(i + 2) - Scalar(2) * y_(i + 1) + y_(i)) / (h * h);
      if (i == 0) {
        c_prime(i) = Scalar(1) / Scalar(4);
        d_prime(i) = rhs / Scalar(4);
      } else {
        const Scalar denom = Scalar(4) - c_prime(i - 1);
        c_prime(i) = Scalar(1) / denom;
        d_prime(i) = (rhs - d_prime(i - 1)) / denom;
      }
    }
    m_(k) = d_prime(k - 1);
    for (Eigen::Index i = k - 2; i >= 0; --i) {
      m_(i + 1) = d_prime(i) - c_prime(i) * m_(i + 2);
    }
  }

  Scalar x_min() const { return x0_; }
  Scalar x_max() const { return x0_ + h_ * Scalar(y_.size() - 1); }
  Scalar step() const { return h_; }
  Eigen::Index size() const { return y_.size(); }

  Scalar operator()(Scalar x) const {
    Eigen::Index i = static_cast<Eigen::Index>(std::floor((x - x0_) / h_));
    i = std::clamp<Eigen::Index>(i, 0, y_.size() - 2);
    const Scalar t = (x - x0_) / h_ - Scalar(i);
    const Scalar a = Scalar(1) - t;
    return a * y_(i) + t * y_(i + 1) +
           h_ * h_ / Scalar(6) *
               ((a * a * a - a) * m_(i) + (t * t * t - t) * m_(i + 1));
  }

 private:
  Scalar x0_{0};
  Scalar h_{1};
  Vector y_;
  Vector m_;  // second derivatives at the nodes
};

}  // namespace cirmag
