#pragma once

// Quasi-one-dimensional scattering in a harmonic waveguide: 3D scattering
// quantities -> even/odd 1D phase shifts -> transmission.  Internal units
// hbar = m = abar = 1, so hbar*omega = 1/d^2 and E = k^2/2 = 1/d^2 + p^2/2.

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cirmag/flags.hpp"
#include "cirmag/radial.hpp"

namespace cirmag {

struct PartialWaves {
  bool s = true;
  bool p = false;
  bool d = false;

  bool operator==(const PartialWaves&) const = default;
};

/// "s", "s,p", "s,p,d", ...
std::string to_string(const PartialWaves& waves);
PartialWaves parse_partial_waves(const std::string& text);

struct TrapConfig {
  double d = 20.0;   ///< transverse oscillator length (abar)
  double p = 0.01;   ///< longitudinal momentum (1/abar)
  PartialWaves waves;
  /// Evaluate the odd-wave prefactor as 6 V_p p d / d^3 instead of the reduced
  /// 6 V_p p / d^2.  The two are algebraically identical.
  bool literal_p_prefactor = false;

  void validate() const;
  /// 3D collision wavenumber sqrt(2/d^2 + p^2).
  double k() const;
  bool operator==(const TrapConfig&) const = default;
};

struct PhaseShifts1D {
  double eta_plus = 0.0;
  double eta_minus = 0.0;
};

/// 3/2 - E/(2 hbar omega) = 1 - (p d)^2 / 4; throws when the next transverse
/// mode opens (argument <= 0).
double zeta_energy_arg(const TrapConfig& trap);

/// C = -zeta_H(1/2, 3/2 - E/(2 hbar omega)); the s-wave CIR sits at d/a = C.
double cir_constant(const TrapConfig& trap);

/// Trap-dependent zeta values, computed once per trap.
struct CirConstants {
  double C = 0.0;                ///< -zeta_H(1/2, .)
  double zeta_minus_half = 0.0;  ///< zeta_H(-1/2, .)
};
CirConstants cir_constants(const TrapConfig& trap);

/// p tan(eta_+) = -(2/d) (d/a_s - C)^-1.  a_s may be 0 or +-inf.
double even_phase_s(double a_s, const TrapConfig& trap);
double even_phase_s(double a_s, const TrapConfig& trap, const CirConstants& consts);

/// tan(eta_-) = -(6 V_p p/d^2) / (1 - 12 V_p zeta_H(-1/2, .)/d^3).
double odd_phase_p(double V_p, const TrapConfig& trap);
double odd_phase_p(double V_p, const TrapConfig& trap, const CirConstants& consts);

/// Hurwitz-zeta coefficients entering the coupled s/d even-channel formula,
/// in the sign convention where the leading constant is zeta_H(1/2, .) = -C.
struct DWaveCoefficients {
  double C2 = 0.0;
  double C3 = 0.0;
  double C4 = 0.0;
};

using DWaveCoefficientProvider = std::function<DWaveCoefficients(const TrapConfig&)>;

/// Provider returning the same coefficients for every trap.
DWaveCoefficientProvider fixed_d_wave_coefficients(double c2, double c3, double c4);

/// Even phase shift including the d-wave channel.  Throws ConfigError when
/// `provider` is empty.
double even_phase_sd(double a_s, double a_d, const TrapConfig& trap,
                     const DWaveCoefficientProvider& provider);
double even_phase_sd(double a_s, double a_d, const TrapConfig& trap, const CirConstants& consts,
                     const DWaveCoefficients& coeffs);

/// f(eta) = -1 / (1 + i cot eta).
std::complex<double> scattering_amplitude(double eta);

/// |1 + f_+ + f_-|^2.  Algebraically cos^2(eta_+ - eta_-).
double transmission(const PhaseShifts1D& ph);
/// cos^2(eta_+ + eta_-), the form used for T(B).  Agrees with transmission()
/// only when eta_- = 0 (or the odd phase is taken with the opposite sign).
double transmission_phase_form(const PhaseShifts1D& ph);
/// sin^2(eta_+ + eta_-) = 1 - T, without cancellation near T = 1.
double reflection_phase_form(const PhaseShifts1D& ph);

/// Phase shifts from 3D data for the partial waves enabled in `trap`.
PhaseShifts1D phases_from(const ScatteringData& data, const TrapConfig& trap,
                          const DWaveCoefficientProvider& provider = {});
PhaseShifts1D phases_from(const ScatteringData& data, const TrapConfig& trap,
                          const CirConstants& consts, const DWaveCoefficients& coeffs);

struct TransmissionPoint {
  double B = 0.0;
  double T = 0.0;
  double eta_plus = 0.0;
  double eta_minus = 0.0;
  unsigned flags = kFlagOk;
};

/// T(B) on a monotone field grid.  Points are independent; `threads` only
/// changes wall time.
std::vector<TransmissionPoint> transmission_vs_B(const TrapConfig& trap,
                                                 const RadialSolver& solver,
                                                 const FeshbachResonance& res,
                                                 const std::vector<double>& B_grid,
                                                 double mass_factor,
                                                 const DWaveCoefficientProvider& provider = {},
                                                 int threads = 1);

}  // namespace cirmag
