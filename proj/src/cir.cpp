#include "cirmag/cir.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "cirmag/parallel.hpp"
#include "cirmag/specfun.hpp"

namespace cirmag {

namespace {

constexpr double kPi = std::numbers::pi;

// atan(num/den) folded into (-pi/2, pi/2]; den = 0 maps to pi/2.
double phase_from_ratio(double num, double den) {
  double eta = std::atan2(num, den);
  if (eta > kPi / 2) eta -= kPi;
  if (eta <= -kPi / 2) eta += kPi;
  return eta;
}

#ifndef NDEBUG
// The CIR constants are only as good as the zeta digits; check the recurrence
// once per process in debug builds.
[[maybe_unused]] const bool kZetaSelfCheck = [] {
  for (double s : {0.5, -0.5}) {
    for (double a : {0.05, 0.5, 0.99}) {
      const double lhs = hurwitz_zeta(s, a);
      const double rhs = hurwitz_zeta(s, a + 1.0) + std::pow(a, -s);
      assert(std::abs(lhs - rhs) <= 1e-10 * std::abs(lhs));
    }
  }
  return true;
}();
#endif

}  // namespace

std::string flags_to_string(unsigned flags) {
  if (flags == kFlagOk) return "OK";
  std::string out;
  auto add = [&](unsigned bit, const char* name) {
    if (flags & bit) {
      if (!out.empty()) out += '|';
      out += name;
    }
  };
  add(kFlagPole, "POLE");
  add(kFlagSaturated, "SATURATED");
  add(kFlagSingular, "SINGULAR");
  return out;
}

std::string to_string(const PartialWaves& waves) {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (on) {
      if (!out.empty()) out += ',';
      out += name;
    }
  };
  add(waves.s, "s");
  add(waves.p, "p");
  add(waves.d, "d");
  return out;
}

PartialWaves parse_partial_waves(const std::string& text) {
  PartialWaves waves{false, false, false};
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    item = item.substr(b, e - b + 1);
    if (item == "s") {
      waves.s = true;
    } else if (item == "p") {
      waves.p = true;
    } else if (item == "d") {
      waves.d = true;
    } else {
      throw ConfigError("unknown partial wave '" + item + "' (expected s, p or d)");
    }
  }
  if (!waves.s && !waves.p && !waves.d) throw ConfigError("no partial waves enabled");
  return waves;
}

void TrapConfig::validate() const {
  if (!(d > 0.0) || !std::isfinite(d)) throw ConfigError("trap.d must be positive");
  if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("trap.p must be non-negative");
  if (!(p * d < 2.0)) {
    throw DomainError("trap: p d must stay below 2 (single transverse mode)");
  }
}

double TrapConfig::k() const { return std::sqrt(2.0 / (d * d) + p * p); }

double zeta_energy_arg(const TrapConfig& trap) {
  const double arg = 1.0 - trap.p * trap.p * trap.d * trap.d / 4.0;
  if (!(arg > 0.0)) {
    throw DomainError("zeta_energy_arg: energy reaches the next transverse mode");
  }
  return arg;
}

double cir_constant(const TrapConfig& trap) {
  return -hurwitz_zeta(0.5, zeta_energy_arg(trap));
}

CirConstants cir_constants(const TrapConfig& trap) {
  const double arg = zeta_energy_arg(trap);
  return {-hurwitz_zeta(0.5, arg), hurwitz_zeta(-0.5, arg)};
}

double even_phase_s(double a_s, const TrapConfig& trap, const CirConstants& consts) {
  const double num = -2.0 / (trap.p * trap.d);
  return phase_from_ratio(num, trap.d / a_s - consts.C);
}

double even_phase_s(double a_s, const TrapConfig& trap) {
  return even_phase_s(a_s, trap, cir_constants(trap));
}

double odd_phase_p(double V_p, const TrapConfig& trap, const CirConstants& consts) {
  const double d3 = trap.d * trap.d * trap.d;
  // numerator and denominator divided by V_p so that V_p = +-inf is regular
  const double prefactor =
      trap.literal_p_prefactor ? 6.0 * trap.p * trap.d / d3 : 6.0 * trap.p / (trap.d * trap.d);
  return phase_from_ratio(-prefactor, 1.0 / V_p - 12.0 * consts.zeta_minus_half / d3);
}

double odd_phase_p(double V_p, const TrapConfig& trap) {
  return odd_phase_p(V_p, trap, cir_constants(trap));
}

DWaveCoefficientProvider fixed_d_wave_coefficients(double c2, double c3, double c4) {
  return [=](const TrapConfig&) { return DWaveCoefficients{c2, c3, c4}; };
}

double even_phase_sd(double a_s, double a_d, const TrapConfig& trap, const CirConstants& consts,
                     const DWaveCoefficients& c) {
  const double d = trap.d;
  const double cc = -consts.C;  // zeta_H(1/2, .)
  const double q = std::pow(a_d / d, 5);
  double p_tan;
  if (std::isfinite(a_s) && std::abs(a_s) <= d) {
    const double x = a_s / d;
    const double lead = 1.0 + cc * x;
    const double shift = 1.0 + (cc - c.C4 / 2.0) * x;
    const double inner = lead + q * (c.C2 + c.C3 * x);
    p_tan = -(2.0 * a_s / (d * d) + 10.0 * q / d * shift * shift / inner) / lead;
  } else {
    // same expression with numerator and denominators divided by a_s / d
    const double y = d / a_s;
    const double lead = y + cc;
    const double shift = y + cc - c.C4 / 2.0;
    const double inner = lead + q * (c.C2 * y + c.C3);
    p_tan = -(2.0 / d / lead + 10.0 * q / d * shift * shift / (lead * inner));
  }
  return phase_from_ratio(p_tan, trap.p);
}

double even_phase_sd(double a_s, double a_d, const TrapConfig& trap,
                     const DWaveCoefficientProvider& provider) {
  if (!provider) {
    throw ConfigError("d-wave channel enabled without a coefficient provider");
  }
  return even_phase_sd(a_s, a_d, trap, cir_constants(trap), provider(trap));
}

std::complex<double> scattering_amplitude(double eta) {
  const double s = std::sin(eta);
  return -s / std::complex<double>(s, std::cos(eta));
}

double transmission(const PhaseShifts1D& ph) {
  const std::complex<double> amp =
      1.0 + scattering_amplitude(ph.eta_plus) + scattering_amplitude(ph.eta_minus);
  return std::norm(amp);
}

double transmission_phase_form(const PhaseShifts1D& ph) {
  const double c = std::cos(ph.eta_plus + ph.eta_minus);
  return c * c;
}

double reflection_phase_form(const PhaseShifts1D& ph) {
  const double s = std::sin(ph.eta_plus + ph.eta_minus);
  return s * s;
}

PhaseShifts1D phases_from(const ScatteringData& data, const TrapConfig& trap,
                          const CirConstants& consts, const DWaveCoefficients& coeffs) {
  PhaseShifts1D ph;
  if (trap.waves.d) {
    const double a_s = trap.waves.s ? data.a_s : 0.0;
    ph.eta_plus = even_phase_sd(a_s, data.a_d, trap, consts, coeffs);
  } else if (trap.waves.s) {
    ph.eta_plus = even_phase_s(data.a_s, trap, consts);
  }
  if (trap.waves.p) ph.eta_minus = odd_phase_p(data.V_p, trap, consts);
  return ph;
}

PhaseShifts1D phases_from(const ScatteringData& data, const TrapConfig& trap,
                          const DWaveCoefficientProvider& provider) {
  DWaveCoefficients coeffs;
  if (trap.waves.d) {
    if (!provider) throw ConfigError("d-wave channel enabled without a coefficient provider");
    coeffs = provider(trap);
  }
  return phases_from(data, trap, cir_constants(trap), coeffs);
}

std::vector<TransmissionPoint> transmission_vs_B(const TrapConfig& trap,
                                                 const RadialSolver& solver,
                                                 const FeshbachResonance& res,
                                                 const std::vector<double>& B_grid,
                                                 double mass_factor,
                                                 const DWaveCoefficientProvider& provider,
                                                 int threads) {
  trap.validate();
  res.validate();
  if (trap.waves.d && !provider) {
    throw ConfigError("d-wave channel enabled without a coefficient provider");
  }
  const double k = trap.k();
  std::vector<TransmissionPoint> curve(B_grid.size());
  parallel_for(B_grid.size(), threads, [&](std::size_t i) {
    TransmissionPoint& pt = curve[i];
    pt.B = B_grid[i];
    try {
      const ScatteringData data = solver.scattering_quantities(res, pt.B, k, mass_factor);
      const PhaseShifts1D ph = phases_from(data, trap, provider);
      pt.eta_plus = ph.eta_plus;
      pt.eta_minus = ph.eta_minus;
      pt.T = transmission_phase_form(ph);
      const bool pole = (trap.waves.s && data.pole[0]) || (trap.waves.p && data.pole[1]) ||
                        (trap.waves.d && data.pole[2]) || pt.B == res.B_res;
      if (pole) pt.flags |= kFlagPole;
    } catch (const BracketingError&) {
      pt.T = std::numeric_limits<double>::quiet_NaN();
      pt.flags |= kFlagPole;
    }
  });
  return curve;
}

}  // namespace cirmag
