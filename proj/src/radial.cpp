#include "cirmag/radial.hpp"

#include <algorithm>
#include <limits>
#include <string>
#include <tuple>

namespace cirmag {

namespace {

constexpr double kPi = std::numbers::pi;

double fold_phase(double delta) {
  // (-pi/2, pi/2]
  while (delta > kPi / 2) delta -= kPi;
  while (delta <= -kPi / 2) delta += kPi;
  return delta;
}

}  // namespace

void FeshbachResonance::validate() const {
  if (!std::isfinite(B_res) || !std::isfinite(Delta) || !std::isfinite(a_bg)) {
    throw ConfigError("resonance parameters must be finite");
  }
  if (Delta == 0.0) throw ConfigError("resonance width Delta must be nonzero");
  if (a_bg == 0.0) throw ConfigError("background scattering length a_bg must be nonzero");
}

double feshbach_scattering_length(const FeshbachResonance& res, double B) {
  const double detuning = B - res.B_res;
  if (detuning == 0.0) return std::numeric_limits<double>::infinity();
  return res.a_bg * (1.0 - res.Delta / detuning);
}

double beta6_over_abar() {
  const double g = gamma_fn(0.25);
  return g * g / (2.0 * kPi);
}

double vdw_length_nm(double c6_au, double mass_u) {
  constexpr double kElectronMassPerU = 1822.888486209;
  constexpr double kBohrNm = 0.0529177210903;
  // pinned impurity: reduced mass equals the atom mass
  return vdw_length(c6_au, mass_u * kElectronMassPerU) * kBohrNm;
}

void VdwModel::validate() const {
  if (!(abar > 0.0)) throw ConfigError("model.abar must be positive");
  if (!(r_core > 0.0)) throw ConfigError("model.r_core must be positive");
  if (!(r_max_min > r_core)) throw ConfigError("model.r_max_min must exceed r_core");
  if (!(r_max_factor > 0.0)) throw ConfigError("model.r_max_factor must be positive");
  if (steps_per_wavelength < 20) {
    throw ResolutionError("steps_per_wavelength must be at least 20, got " +
                          std::to_string(steps_per_wavelength));
  }
  if (!(a_cap > 0.0)) throw ConfigError("model.a_cap must be positive");
  if (!(potential_scale >= 0.0)) throw ConfigError("model.potential_scale must be >= 0");
  if (!(zero_energy_r_max > r_max_min)) {
    throw ConfigError("model.zero_energy_r_max must exceed r_max_min");
  }
}

RadialSolver::RadialSolver(const VdwModel& model) : model_(model) {
  model_.validate();
  const double beta6 = beta6_over_abar() * model_.abar;
  beta6_pow4_ = model_.potential_scale * std::pow(beta6, 4);
  if (beta6_pow4_ > 0.0) locate_branch();
}

double RadialSolver::target_step(int ell, double k, double r) const {
  const double r2 = r * r;
  const double centrifugal = std::max(ell * (ell + 1), 1) / r2;
  const double k_local = std::sqrt(k * k + beta6_pow4_ / (r2 * r2 * r2) + centrifugal);
  return 2.0 * kPi / (k_local * model_.steps_per_wavelength);
}

// Numerov outward from a node at r_core.  The step follows the local
// wavelength; it is doubled (reusing every second point, no interpolation)
// whenever the target allows.
RadialSolver::Tail RadialSolver::integrate(int ell, double k, double r_core,
                                           double r_end) const {
  const double l_term = ell * (ell + 1);
  const double k2 = k * k;
  auto g = [&](double r) {
    const double r2 = r * r;
    return l_term / r2 - beta6_pow4_ / (r2 * r2 * r2) - k2;
  };

  double h = target_step(ell, k, r_core);
  // three most recent points on a uniform stencil of spacing h
  double r_a = r_core, u_a = 0.0;        // r0 - 2h (valid once steps >= 2)
  double r_b = r_core, u_b = 0.0;        // r0 - h
  double r_c = r_core + h, u_c = h;      // r0
  double g_b = g(r_b), g_c = g(r_c);
  int steps = 1;
  while (r_c < r_end) {
    if (steps >= 2 && 2.0 * h <= target_step(ell, k, r_c)) {
      r_b = r_a;
      u_b = u_a;
      g_b = g(r_b);
      h *= 2.0;
      steps = 0;
    }
    const double h2 = h * h / 12.0;
    const double r_n = r_c + h;
    const double g_n = g(r_n);
    const double u_n =
        (2.0 * u_c * (1.0 + 5.0 * h2 * g_c) - u_b * (1.0 - h2 * g_b)) / (1.0 - h2 * g_n);
    r_a = r_b;
    u_a = u_b;
    r_b = r_c;
    u_b = u_c;
    g_b = g_c;
    r_c = r_n;
    u_c = u_n;
    g_c = g_n;
    ++steps;
  }
  return {r_b, u_b, r_c, u_c};
}

std::pair<double, double> RadialSolver::asymptotic_amplitudes(int ell, double k,
                                                             double r_core) const {
  if (!(k > 0.0)) throw DomainError("phase shift requires k > 0");
  if (ell < 0 || ell > 2) throw UnsupportedError("phase shifts only for l = 0, 1, 2");
  const double r_end = std::max(model_.r_max_min * model_.abar, model_.r_max_factor / k);
  const Tail t = integrate(ell, k, r_core, r_end);
  if (k * (t.r2 - t.r1) > 2.0 * kPi / 20.0) {
    throw ResolutionError("radial grid under-resolves the asymptotic wavelength");
  }
  const auto f1 = riccati_bessel(ell, k * t.r1);
  const auto f2 = riccati_bessel(ell, k * t.r2);
  // u = A j - B n on both points
  const double w = f1.j * f2.n - f2.j * f1.n;
  return {(t.u1 * f2.n - t.u2 * f1.n) / w, (t.u1 * f2.j - t.u2 * f1.j) / w};
}

double RadialSolver::tan_phase_shift(int ell, double k, double r_core) const {
  const auto [amp_j, amp_n] = asymptotic_amplitudes(ell, k, r_core);
  if (amp_j == 0.0) return std::copysign(std::numeric_limits<double>::infinity(), amp_n);
  return amp_n / amp_j;
}

double RadialSolver::phase_shift(int ell, double k, double r_core) const {
  return fold_phase(std::atan(tan_phase_shift(ell, k, r_core)));
}

double RadialSolver::phase_shift(int ell, double k) const {
  return phase_shift(ell, k, model_.r_core);
}

std::pair<double, double> RadialSolver::zero_energy_asymptote(double r_core) const {
  const Tail t = integrate(0, 0.0, r_core, model_.zero_energy_r_max * model_.abar);
  const double beta = (t.u2 - t.u1) / (t.r2 - t.r1);
  return {t.u2 - beta * t.r2, beta};
}

double RadialSolver::zero_energy_length(double r_core) const {
  const auto [alpha, beta] = zero_energy_asymptote(r_core);
  if (beta == 0.0) return std::numeric_limits<double>::infinity();
  return -alpha / beta;
}

void RadialSolver::locate_branch() {
  const double beta6_sq = std::sqrt(beta6_pow4_);
  auto slope = [&](double r) { return zero_energy_asymptote(r).second; };
  auto bisect_zero = [&](double lo, double hi, double f_lo) {
    for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi;
         ++it) {
      const double mid = 0.5 * (lo + hi);
      const double f_mid = slope(mid);
      if ((f_mid > 0.0) == (f_lo > 0.0)) {
        lo = mid;
        f_lo = f_mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };
  // Zeros of the asymptotic slope are the poles of a(r_core); the local node
  // spacing is about pi r^3 / beta6^2, scan at an eighth of it.
  const double r_ref = model_.r_core;
  const double s_ref = slope(r_ref);
  double lo = r_ref, hi = r_ref;
  double r = r_ref;
  for (;;) {
    const double step = kPi * r * r * r / (8.0 * beta6_sq);
    const double next = r - step;
    if (next <= 0.0) throw BracketingError("no lower branch boundary above r = 0");
    const double s = slope(next);
    if ((s > 0.0) != (s_ref > 0.0)) {
      lo = bisect_zero(next, r, s);
      break;
    }
    r = next;
  }
  r = r_ref;
  for (;;) {
    const double step = kPi * r * r * r / (8.0 * beta6_sq);
    const double next = r + step;
    if (next >= model_.r_max_min) throw BracketingError("no upper branch boundary");
    const double s = slope(next);
    if ((s > 0.0) != (s_ref > 0.0)) {
      hi = bisect_zero(r, next, s_ref);
      break;
    }
    r = next;
  }
  branch_ = {lo, hi};
}

double RadialSolver::tune_core(double a_target) const {
  if (!std::isfinite(a_target) || std::abs(a_target) >= model_.a_cap) {
    throw BracketingError("tune_core: |a_target| must be below a_cap = " +
                          std::to_string(model_.a_cap));
  }
  if (std::abs(a_target) <= 1.0) return tune_impl(a_target, 0.0, false);
  return tune_impl(a_target, 1.0 / a_target, true);
}

double RadialSolver::tune_core_inverse(double inverse_a) const {
  if (!std::isfinite(inverse_a)) {
    throw BracketingError("tune_core_inverse: 1/a must be finite");
  }
  if (std::abs(inverse_a) >= 1.0) return tune_impl(1.0 / inverse_a, inverse_a, false);
  return tune_impl(1.0 / inverse_a, inverse_a, true);
}

// Root of alpha + a beta (or beta + alpha / a for |a| > 1, which stays regular
// at the pole of a).  beta vanishes at both ends of the branch, where alpha has
// opposite signs, so the residual is bracketed for every target.
double RadialSolver::tune_impl(double a_target, double inverse_a, bool inverse_form) const {
  if (beta6_pow4_ == 0.0) {
    throw BracketingError("tune_core: no short-range branch without a dispersion potential");
  }
  auto [lo, hi] = branch_;
  if (inverse_form && inverse_a == 0.0) return hi;
  auto residual = [&](double r) {
    const auto [alpha, beta] = zero_energy_asymptote(r);
    return inverse_form ? beta + alpha * inverse_a : alpha + a_target * beta;
  };
  double f_lo = residual(lo);
  const double f_hi = residual(hi);
  if ((f_lo > 0.0) == (f_hi > 0.0)) {
    // |1/a| below the resolution of beta at the branch ends: return the end
    // that the root approaches from this side of the pole
    if (inverse_form && std::abs(inverse_a) < 1e-9) {
      const double probe = tune_impl(0.0, std::copysign(1e-6, inverse_a), true);
      return probe - lo < hi - probe ? lo : hi;
    }
    throw BracketingError("tune_core: target scattering length not bracketed on branch");
  }
  // Bisect to the last bit so that T(B) built on top is smooth enough for
  // finite differences.
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double f_mid = residual(mid);
    if (f_mid == 0.0) break;
    if ((f_mid > 0.0) == (f_lo > 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 2.0 * std::numeric_limits<double>::epsilon() * hi) break;
  }
  return mid;
}

void fill_from_amplitudes(ScatteringData& out) {
  const double k = out.k;
  const double mf = out.mass_factor;
  std::array<double, 3> tans{};
  for (int ell = 0; ell < 3; ++ell) {
    const double aj = out.amp_j[ell];
    const double an = out.amp_n[ell];
    tans[ell] = aj == 0.0 ? std::copysign(std::numeric_limits<double>::infinity(), an) : an / aj;
    out.delta[ell] = fold_phase(std::atan2(an, aj));
    out.pole[ell] = !std::isfinite(tans[ell]);
  }
  out.a_s = -mf * tans[0] / k;
  out.V_p = -mf * tans[1] / (k * k * k);
  const double ad5 = mf * tans[2] / std::pow(k, 5);
  out.a_d = std::copysign(std::pow(std::abs(ad5), 0.2), ad5);
}

ScatteringData RadialSolver::scattering_at_core(double r_core, double k,
                                                double mass_factor) const {
  ScatteringData out;
  out.k = k;
  out.mass_factor = mass_factor;
  out.r_core = r_core;
  for (int ell = 0; ell < 3; ++ell) {
    std::tie(out.amp_j[ell], out.amp_n[ell]) = asymptotic_amplitudes(ell, k, r_core);
  }
  fill_from_amplitudes(out);
  return out;
}

ScatteringData RadialSolver::scattering_quantities(const FeshbachResonance& res, double B,
                                                   double k, double mass_factor) const {
  if (!(k > 0.0)) throw DomainError("scattering_quantities requires k > 0");
  const double detuning = B - res.B_res;
  // 1/a(B) = (B - B_res) / (a_bg (B - B_res - Delta)), finite at the pole
  const double denom = res.a_bg * (detuning - res.Delta);
  double r_core;
  if (denom == 0.0) {
    // a(B) = 0 exactly
    r_core = tune_core(0.0);
  } else {
    r_core = tune_core_inverse(detuning / denom);
  }
  return scattering_at_core(r_core, k, mass_factor);
}

double solve_phase_shift(const VdwModel& model, int ell, double k) {
  return RadialSolver(model).phase_shift(ell, k);
}

}  // namespace cirmag
