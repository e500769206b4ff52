#pragma once

// Fisher information and Cramer-Rao bounds for single tubes and tube arrays.
// Fields in Gauss, positions in mm, gradients in Gauss/mm.

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cirmag/flags.hpp"
#include "cirmag/transmission_model.hpp"

namespace cirmag {

template <typename Scalar>
using FisherMatrix = Eigen::Matrix<Scalar, 3, 3>;
using FisherMatrix3d = FisherMatrix<double>;

/// Clamp applied to T and 1 - T before forming 1/(T(1-T)).
inline constexpr double kClampEpsilon = 1e-30;
/// Normalized condition number above which a FIM block counts as singular.
inline constexpr double kSingularCondition = 1e12;

struct Derivative {
  double value = 0.0;
  double error = 0.0;  ///< |D(h) - D(h/2)| / 3
  double step = 0.0;   ///< h actually used
};

/// Richardson-extrapolated central difference of f at x.  The step starts
/// at h0 and is shrunk while the two estimates disagree; throws
/// DerivativeError with the last bracket [x - h, x + h] otherwise.
Derivative richardson_derivative(const std::function<double(double)>& f, double x, double h0);

struct SlopeSample {
  double T = 0.0;
  double R = 1.0;
  Derivative dT;
};

/// T and dT/dB.  Where T > 1/2 the difference is taken on R = 1 - T.
SlopeSample dT_dB(const TransmissionModel& model, double B, double h0);

struct FisherValue {
  double F = 0.0;
  bool saturated = false;
};

/// (dT/dB)^2 / (T (1 - T)) with T and 1 - T clamped to kClampEpsilon.
FisherValue fisher_single(double T, double dTdB);
/// Same with 1 - T supplied separately (no cancellation near T = 1).
FisherValue fisher_single(double T, double R, double dTdB);
/// Two-outcome sum  sum_xi (d p(xi)/dB)^2 / p(xi).
double fisher_two_outcome(double T, double dTdB);

struct FisherPoint {
  double B = 0.0;
  double T = 0.0;
  double dTdB = 0.0;
  double F = 0.0;
  double dB = 0.0;  ///< F^{-1/2}
  unsigned flags = kFlagOk;
};

std::vector<FisherPoint> single_tube_uncertainty(const TransmissionModel& model,
                                                 const std::vector<double>& B_grid, double h0,
                                                 int threads = 1);

struct UncertaintyMinimum {
  double B = 0.0;
  double dB = std::numeric_limits<double>::infinity();
};

/// Smallest F^{-1/2} over the span of B_grid: scan the grid, then zoom into
/// the `candidates` deepest local minima.  Features narrower than the grid
/// spacing are still found because F^{-1/2} rises only quadratically away
/// from a sharp resonance.
UncertaintyMinimum minimize_uncertainty(const TransmissionModel& model,
                                        const std::vector<double>& B_grid, double h0,
                                        int threads = 1, int candidates = 8);

/// Nearest field to `B_start` within `span` where T crosses 1/2 (found on a
/// 2001-point scan each side, then bisected).  Returns `B_start` when T does
/// not cross 1/2 in that window.
double mid_fringe_near(const TransmissionModel& model, double B_start, double span);

struct TubeArray {
  std::vector<Eigen::Vector2d> positions;  ///< mm
  double spacing = 0.0;                    ///< mm
  int mx = 0;
  int my = 0;

  /// mx x my grid centered on the origin.
  static TubeArray square_grid(int mx, int my, double spacing_mm);
  static TubeArray from_positions(std::vector<Eigen::Vector2d> positions);

  std::size_t size() const { return positions.size(); }
  void validate() const;
};

struct FieldModel {
  double B0 = 0.0;
  double Bx = 0.0;  ///< G/mm
  double By = 0.0;  ///< G/mm

  double at(const Eigen::Vector2d& r) const { return B0 + Bx * r.x() + By * r.y(); }
};

/// F_i (1, x, y)^T (1, x, y).
template <typename Scalar>
FisherMatrix<Scalar> fim_tube(Scalar F_i, Scalar x, Scalar y) {
  const Eigen::Matrix<Scalar, 3, 1> v(Scalar(1), x, y);
  return F_i * v * v.transpose();
}

/// Per-tube FIM from (T, dT/dB).
FisherMatrix3d fim_tube(double T, double dTdB, double x, double y);

struct ArrayFisher {
  FisherMatrix3d F = FisherMatrix3d::Zero();
  std::size_t tubes = 0;
  std::size_t saturated = 0;
};

/// Sum of per-tube matrices.  Tubes sharing a local field share one
/// evaluation of T and dT/dB.  Throws EstimabilityError if every tube
/// is saturated.
ArrayFisher fim_array(const TubeArray& array, const FieldModel& field,
                      const TransmissionModel& model, double h0);

/// Parameter selection bits for crlb().
enum ParamMask : unsigned { kParamB0 = 1, kParamBx = 2, kParamBy = 4, kParamAll = 7 };

struct CrlbResult {
  Eigen::Vector3d sigma = Eigen::Vector3d::Constant(std::numeric_limits<double>::quiet_NaN());
  double condition = 0.0;  ///< of the diagonally normalized block
  Eigen::Matrix3d inverse = Eigen::Matrix3d::Zero();  ///< F_sub^-1 embedded
  unsigned flags = kFlagOk;
};

/// Closed-form inverse through the adjugate.
template <typename Scalar, int N>
Eigen::Matrix<Scalar, N, N> adjugate_inverse(const Eigen::Matrix<Scalar, N, N>& m) {
  static_assert(N >= 1 && N <= 3);
  Eigen::Matrix<Scalar, N, N> inv;
  if constexpr (N == 1) {
    inv(0, 0) = Scalar(1) / m(0, 0);
  } else if constexpr (N == 2) {
    const Scalar det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    inv << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
    inv /= det;
  } else {
    inv(0, 0) = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
    inv(0, 1) = m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2);
    inv(0, 2) = m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1);
    inv(1, 0) = m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2);
    inv(1, 1) = m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0);
    inv(1, 2) = m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2);
    inv(2, 0) = m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0);
    inv(2, 1) = m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1);
    inv(2, 2) = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    const Scalar det = m(0, 0) * inv(0, 0) + m(0, 1) * inv(1, 0) + m(0, 2) * inv(2, 0);
    inv /= det;
  }
  return inv;
}

/// Numerical rank of a PSD FIM block (eigenvalues of the normalized matrix
/// above 1/kSingularCondition).
int fim_rank(const FisherMatrix3d& F, unsigned mask = kParamAll);

/// (1/sqrt(N)) sqrt([F_sub^-1]_ii) for the selected parameters.  A singular
/// block throws EstimabilityError naming the null direction, or with
/// `throw_on_singular` false returns NaN sigmas flagged SINGULAR.
CrlbResult crlb(const FisherMatrix3d& F, double N, unsigned mask,
                bool throw_on_singular = true);

struct MapPoint {
  double B0 = 0.0;
  double Bx = 0.0;
  double dB0 = 0.0;
  double dBx = 0.0;
  unsigned flags = kFlagOk;
};

/// CRLB per shot of (B0, Bx) on the grid B0_grid x Bx_grid with By = 0.
/// Row-major in B0 (Bx varies fastest).
std::vector<MapPoint> uncertainty_map(const TubeArray& array, const TransmissionModel& model,
                                      const std::vector<double>& B0_grid,
                                      const std::vector<double>& Bx_grid, double h0,
                                      int threads = 1);

/// Indices of strict interior local minima of a sampled curve.  Plateaus of
/// equal values count once.  NaN entries break the sequence.
std::vector<std::size_t> local_minima(const std::vector<double>& values);

}  // namespace cirmag
