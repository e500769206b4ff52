#pragma once

// Three-dimensional radial scattering off a -C6/r^6 potential with a hard
// inner wall.  Moving the wall tunes the short-range phase, which is how a
// magnetic Feshbach resonance is emulated: B -> a(B) -> wall position ->
// energy-dependent s, p and d-wave quantities.
//
// Units: hbar = mu = abar = 1, so the radial equation reads
// u'' = [l(l+1)/r^2 - beta6^4/r^6 - k^2] u with beta6 = Gamma(1/4)^2/(2 pi).

#include <array>
#include <cmath>
#include <numbers>
#include <utility>

#include "cirmag/errors.hpp"
#include "cirmag/specfun.hpp"

namespace cirmag {

/// a(B) = a_bg (1 - Delta / (B - B_res)); B in Gauss, a_bg in units of abar.
struct FeshbachResonance {
  double B_res = 0.0;
  double Delta = 0.1;
  double a_bg = 9.76;

  void validate() const;
  bool operator==(const FeshbachResonance&) const = default;
};

/// Zero-energy s-wave scattering length at field B.  Returns +infinity at
/// B == B_res.
double feshbach_scattering_length(const FeshbachResonance& res, double B);

/// Van der Waals length abar = 2 pi (2 mu C6 / hbar^2)^(1/4) / Gamma(1/4)^2 in
/// whatever consistent unit system the inputs use.
template <typename Scalar>
Scalar vdw_length(Scalar C6, Scalar mu, Scalar hbar = Scalar(1)) {
  if (!(C6 > Scalar(0)) || !(mu > Scalar(0)) || !(hbar > Scalar(0))) {
    throw DomainError("vdw_length: C6, mu and hbar must be positive");
  }
  const Scalar g = gamma_fn(Scalar(0.25));
  using std::pow;
  return Scalar(2) * std::numbers::pi_v<Scalar> *
         pow(Scalar(2) * mu * C6 / (hbar * hbar), Scalar(0.25)) / (g * g);
}

/// abar for a pinned-impurity collision (mu = m) given C6 in Hartree bohr^6
/// and the atom mass in unified atomic mass units.  Result in nm.
double vdw_length_nm(double c6_au, double mass_u);

/// beta6 / abar = Gamma(1/4)^2 / (2 pi).
double beta6_over_abar();

struct VdwModel {
  double abar = 1.0;
  /// Reference wall position; selects the short-range branch used for tuning.
  double r_core = 0.2;
  /// Outer matching radius is max(r_max_min, r_max_factor / k).
  double r_max_min = 50.0;
  double r_max_factor = 10.0;
  int steps_per_wavelength = 100;
  /// Largest |a| accepted by tune_core.
  double a_cap = 1.0e3;
  /// Multiplies the dispersion potential; 0 turns the model into a hard sphere.
  double potential_scale = 1.0;
  /// Outer radius of the zero-energy integration used for a(r_core).
  double zero_energy_r_max = 2000.0;

  void validate() const;
  bool operator==(const VdwModel&) const = default;
};

struct ScatteringData {
  double k = 0.0;
  double a_s = 0.0;   ///< -(m/mu) tan(delta_0) / k
  double V_p = 0.0;   ///< -(m/mu) tan(delta_1) / k^3
  double a_d = 0.0;   ///< a_d^5 = (m/mu) tan(delta_2) / k^5, real fifth root
  double mass_factor = 1.0;
  std::array<double, 3> delta{};     ///< phase shifts in (-pi/2, pi/2]
  std::array<bool, 3> pole{};        ///< quantity is a signed infinity
  /// Asymptotic amplitudes u -> amp_j[l] j_l - amp_n[l] n_l for a unit slope
  /// at the wall, so tan(delta_l) = amp_n / amp_j.  Both vary smoothly with
  /// the wall position even where delta_l sweeps quickly.
  std::array<double, 3> amp_j{};
  std::array<double, 3> amp_n{};
  double r_core = 0.0;
};

/// Rebuilds a_s, V_p, a_d, delta and pole flags from the amplitudes.
void fill_from_amplitudes(ScatteringData& data);

class RadialSolver {
 public:
  explicit RadialSolver(const VdwModel& model);

  const VdwModel& model() const { return model_; }

  /// delta_l(k) mod pi at the model's reference wall.
  double phase_shift(int ell, double k) const;
  double phase_shift(int ell, double k, double r_core) const;
  /// tan(delta_l(k)) at wall position r_core (may be +-inf).
  double tan_phase_shift(int ell, double k, double r_core) const;
  /// (amp_j, amp_n) of the outer solution, see ScatteringData.
  std::pair<double, double> asymptotic_amplitudes(int ell, double k, double r_core) const;

  /// Zero-energy s-wave scattering length for a wall at r_core (abar).
  double zero_energy_length(double r_core) const;

  /// Wall position on the reference branch reproducing the zero-energy
  /// scattering length a_target (|a_target| < a_cap).
  double tune_core(double a_target) const;
  /// Same, parameterized by 1/a so that the resonance pole is reachable.
  double tune_core_inverse(double inverse_a) const;

  /// Wall positions delimiting the reference branch (poles of a).
  std::pair<double, double> branch() const { return branch_; }

  ScatteringData scattering_quantities(const FeshbachResonance& res, double B,
                                       double k, double mass_factor = 1.0) const;
  ScatteringData scattering_at_core(double r_core, double k,
                                    double mass_factor = 1.0) const;

 private:
  struct Tail {
    double r1, u1, r2, u2;
  };
  Tail integrate(int ell, double k, double r_core, double r_end) const;
  double target_step(int ell, double k, double r) const;
  // Asymptote u -> alpha + beta r of the zero-energy s-wave solution.
  std::pair<double, double> zero_energy_asymptote(double r_core) const;
  void locate_branch();
  double tune_impl(double a_target, double inverse_a, bool inverse_form) const;

  VdwModel model_;
  double beta6_pow4_;  // (beta6)^4 * potential_scale
  std::pair<double, double> branch_{0.0, 0.0};
};

/// Convenience wrapper: delta_l(k) for the model's reference wall.
double solve_phase_shift(const VdwModel& model, int ell, double k);

}  // namespace cirmag
