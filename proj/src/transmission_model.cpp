#include "cirmag/transmission_model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cirmag/parallel.hpp"

namespace cirmag {

ExactTransmission::ExactTransmission(PhysicsSetup setup)
    : ExactTransmission(setup, std::make_shared<const RadialSolver>(setup.model)) {}

ExactTransmission::ExactTransmission(PhysicsSetup setup,
                                     std::shared_ptr<const RadialSolver> solver)
    : setup_(std::move(setup)), solver_(std::move(solver)) {
  setup_.resonance.validate();
  setup_.trap.validate();
  if (setup_.trap.waves.d && !setup_.d_wave) {
    throw ConfigError("d-wave channel enabled without a coefficient provider");
  }
}

ScatteringData ExactTransmission::scattering(double B) const {
  return solver_->scattering_quantities(setup_.resonance, B, setup_.trap.k(),
                                        setup_.mass_factor);
}

PhaseShifts1D ExactTransmission::phases(double B) const {
  return phases_from(scattering(B), setup_.trap, setup_.d_wave);
}

TransmissionSample ExactTransmission::sample(double B) const {
  const PhaseShifts1D ph = phases(B);
  return {transmission_phase_form(ph), reflection_phase_form(ph), ph.eta_plus + ph.eta_minus};
}

MemoizedTransmission::MemoizedTransmission(const ExactTransmission& exact, double B_min,
                                           double B_max, double step, int threads)
    : setup_(exact.setup()),
      k_(exact.setup().trap.k()),
      consts_(cir_constants(setup_.trap)),
      B_min_(B_min),
      B_max_(B_max) {
  if (!(B_max > B_min) || !(step > 0.0)) {
    throw ConfigError("memoized transmission needs B_max > B_min and a positive step");
  }
  if (setup_.trap.waves.d) coeffs_ = setup_.d_wave(setup_.trap);
  const double B_res = setup_.resonance.B_res;
  // one-sided limits at B_res
  const double nudge = 1e-12 * std::abs(setup_.resonance.Delta);
  std::vector<std::pair<double, double>> ranges;
  if (B_min < B_res && B_res < B_max) {
    ranges = {{B_min, B_res}, {B_res, B_max}};
  } else {
    ranges = {{B_min, B_max}};
  }
  for (const auto& [lo, hi] : ranges) {
    const auto n = std::max<std::size_t>(
        static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1, 3);
    const double h = (hi - lo) / static_cast<double>(n - 1);
    std::vector<ScatteringData> data(n);
    parallel_for(n, threads, [&](std::size_t i) {
      double B = i + 1 == n ? hi : lo + h * static_cast<double>(i);
      if (B == B_res) B += i == 0 ? nudge : -nudge;
      data[i] = exact.scattering(B);
    });
    Segment seg;
    for (int ell = 0; ell < 3; ++ell) {
      Eigen::VectorXd yj(static_cast<Eigen::Index>(n)), yn(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) {
        yj(static_cast<Eigen::Index>(i)) = data[i].amp_j[ell];
        yn(static_cast<Eigen::Index>(i)) = data[i].amp_n[ell];
      }
      seg.amp_j[ell] = UniformCubicSpline<double>(lo, h, std::move(yj));
      seg.amp_n[ell] = UniformCubicSpline<double>(lo, h, std::move(yn));
    }
    segments_.push_back(std::move(seg));
  }
}

std::size_t MemoizedTransmission::nodes() const {
  std::size_t n = 0;
  for (const auto& seg : segments_) n += static_cast<std::size_t>(seg.amp_j[0].size());
  return n;
}

ScatteringData MemoizedTransmission::scattering(double B) const {
  const double slack = 1e-9 * (B_max_ - B_min_);
  if (!(B >= B_min_ - slack && B <= B_max_ + slack)) {
    throw DomainError("memoized transmission queried at B = " + std::to_string(B) +
                      " outside [" + std::to_string(B_min_) + ", " + std::to_string(B_max_) +
                      "]");
  }
  const Segment& seg =
      segments_.size() == 2 && B >= setup_.resonance.B_res ? segments_[1] : segments_[0];
  ScatteringData data;
  data.k = k_;
  data.mass_factor = setup_.mass_factor;
  for (int ell = 0; ell < 3; ++ell) {
    data.amp_j[ell] = seg.amp_j[ell](B);
    data.amp_n[ell] = seg.amp_n[ell](B);
  }
  fill_from_amplitudes(data);
  return data;
}

PhaseShifts1D MemoizedTransmission::phases(double B) const {
  return phases_from(scattering(B), setup_.trap, consts_, coeffs_);
}

TransmissionSample MemoizedTransmission::sample(double B) const {
  const PhaseShifts1D ph = phases(B);
  return {transmission_phase_form(ph), reflection_phase_form(ph), ph.eta_plus + ph.eta_minus};
}

}  // namespace cirmag
