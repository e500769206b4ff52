#pragma once

// T(B) providers consumed by the estimation and Monte Carlo layers.

#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "cirmag/cir.hpp"
#include "cirmag/radial.hpp"
#include "cirmag/spline.hpp"

namespace cirmag {

struct TransmissionSample {
  double T = 0.0;
  double R = 1.0;  ///< 1 - T, computed without cancellation when possible
  /// eta_+ + eta_- (mod pi) when T = cos^2 of it; NaN for other models.
  double phase = std::numeric_limits<double>::quiet_NaN();
};

class TransmissionModel {
 public:
  virtual ~TransmissionModel() = default;
  virtual TransmissionSample sample(double B) const = 0;

  double transmission(double B) const { return sample(B).T; }
};

/// Everything needed to evaluate T(B) from first principles.
struct PhysicsSetup {
  FeshbachResonance resonance;
  TrapConfig trap;
  VdwModel model;
  double mass_factor = 1.0;
  DWaveCoefficientProvider d_wave;
};

/// Full evaluation per call: tune the wall, integrate three partial waves.
class ExactTransmission : public TransmissionModel {
 public:
  explicit ExactTransmission(PhysicsSetup setup);
  ExactTransmission(PhysicsSetup setup, std::shared_ptr<const RadialSolver> solver);

  TransmissionSample sample(double B) const override;
  PhaseShifts1D phases(double B) const;
  ScatteringData scattering(double B) const;

  const PhysicsSetup& setup() const { return setup_; }
  const RadialSolver& solver() const { return *solver_; }

 private:
  PhysicsSetup setup_;
  std::shared_ptr<const RadialSolver> solver_;
};

/// Asymptotic amplitudes of the three partial waves tabulated on a uniform
/// field grid and spline-interpolated.  The amplitudes vary on the scale of
/// the resonance width, while the phase shifts and T(B) can be far
/// narrower, so neither is interpolated directly.  The grid is split at
/// B_res, where the wall jumps between the ends of its branch.
class MemoizedTransmission : public TransmissionModel {
 public:
  MemoizedTransmission(const ExactTransmission& exact, double B_min, double B_max,
                       double step, int threads = 1);

  TransmissionSample sample(double B) const override;
  PhaseShifts1D phases(double B) const;
  ScatteringData scattering(double B) const;

  double B_min() const { return B_min_; }
  double B_max() const { return B_max_; }
  std::size_t nodes() const;

 private:
  struct Segment {
    std::array<UniformCubicSpline<double>, 3> amp_j;
    std::array<UniformCubicSpline<double>, 3> amp_n;
  };

  PhysicsSetup setup_;
  double k_;
  CirConstants consts_;
  DWaveCoefficients coeffs_;
  double B_min_;
  double B_max_;
  std::vector<Segment> segments_;  // one or two, split at B_res
};

/// Wraps an analytic T(B) (tests, synthetic studies).
class FunctionTransmission : public TransmissionModel {
 public:
  explicit FunctionTransmission(std::function<double(double)> T) : T_(std::move(T)) {}
  TransmissionSample sample(double B) const override {
    const double t = T_(B);
    return {t, 1.0 - t};
  }

 private:
  std::function<double(double)> T_;
};

}  // namespace cirmag
