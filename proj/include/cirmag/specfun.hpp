#pragma once

// Special functions for the quasi-1D scattering formulas: Hurwitz zeta at
// real arguments, the gamma function on the positive axis and Riccati-Bessel
// functions for l = 0, 1, 2.  All functions are templated on the scalar type
// and are pure.

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "cirmag/errors.hpp"

namespace cirmag {

namespace detail {

// B_2, B_4, ..., B_14
inline constexpr std::array<double, 7> kBernoulliEven = {
    1.0 / 6.0,   -1.0 / 30.0, 1.0 / 42.0,     -1.0 / 30.0,
    5.0 / 66.0,  -691.0 / 2730.0, 7.0 / 6.0};

}  // namespace detail

/// Hurwitz zeta function zeta(s, a) = sum_{n>=0} (n + a)^(-s) for real s != 1
/// and a > 0, analytically continued to s < 1.
///
/// Euler-Maclaurin summation: 25 explicit terms, the tail integral, and
/// Bernoulli corrections through B_12.  Accurate to ~1e-14 relative for
/// |s| <= 4.
template <typename Scalar>
Scalar hurwitz_zeta(Scalar s, Scalar a) {
  using std::pow;
  if (!(a > Scalar(0))) {
    throw DomainError("hurwitz_zeta: second argument must be positive, got " +
                      std::to_string(static_cast<double>(a)));
  }
  if (s == Scalar(1)) {
    throw PoleError("hurwitz_zeta: pole at s = 1");
  }
  constexpr int kHead = 25;
  Scalar sum(0);
  for (int n = 0; n < kHead; ++n) sum += pow(Scalar(n) + a, -s);

  const Scalar x = Scalar(kHead) + a;
  const Scalar x_pow = pow(x, -s);
  sum += x * x_pow / (s - Scalar(1)) + x_pow / Scalar(2);

  // term_j = B_2j / (2j)! * s (s+1) ... (s+2j-2) * x^(-s-2j+1)
  Scalar rising = s;            // s (s+1) ... (s+2j-2)
  Scalar factorial(2);          // (2j)!
  Scalar x_term = x_pow / x;    // x^(-s-2j+1)
  const Scalar inv_x2 = Scalar(1) / (x * x);
  for (int j = 1; j <= 6; ++j) {
    sum += Scalar(detail::kBernoulliEven[j - 1]) / factorial * rising * x_term;
    rising *= (s + Scalar(2 * j - 1)) * (s + Scalar(2 * j));
    factorial *= Scalar((2 * j + 1) * (2 * j + 2));
    x_term *= inv_x2;
  }
  return sum;
}

/// Gamma function for x > 0 (Lanczos, g = 7, n = 9).
template <typename Scalar>
Scalar gamma_fn(Scalar x) {
  using std::exp;
  using std::pow;
  using std::sqrt;
  if (!(x > Scalar(0))) {
    throw DomainError("gamma_fn: argument must be positive, got " +
                      std::to_string(static_cast<double>(x)));
  }
  static constexpr std::array<double, 9> kCoeff = {
      0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
      771.32342877765313,      -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
  // Shift small arguments up; the approximation is most accurate for x >= 1/2.
  if (x < Scalar(0.5)) return gamma_fn(x + Scalar(1)) / x;
  const Scalar z = x - Scalar(1);
  Scalar series(kCoeff[0]);
  for (int i = 1; i < 9; ++i) series += Scalar(kCoeff[i]) / (z + Scalar(i));
  const Scalar t = z + Scalar(7.5);
  return sqrt(Scalar(2) * std::numbers::pi_v<Scalar>) * pow(t, z + Scalar(0.5)) *
         exp(-t) * series;
}

/// Riccati-Bessel functions x j_l(x), x y_l(x) and their x-derivatives.
/// `n` follows the y_l (Neumann) sign convention: n_0(x) = -cos x.
template <typename Scalar>
struct RiccatiBessel {
  Scalar j;
  Scalar jp;
  Scalar n;
  Scalar np;
};

/// Wronskian j n' - j' n of the Riccati-Bessel pair returned below.
inline constexpr double kRiccatiWronskian = 1.0;

namespace detail {

// x j_l(x) from its power series; used where the closed form cancels.
template <typename Scalar>
Scalar riccati_j_series(int ell, Scalar x) {
  Scalar double_fact(1);  // (2l+1)!!
  for (int m = 3; m <= 2 * ell + 1; m += 2) double_fact *= Scalar(m);
  const Scalar y = -x * x / Scalar(2);
  Scalar term = Scalar(1) / double_fact;
  Scalar sum = term;
  for (int k = 1; k < 40; ++k) {
    term *= y / (Scalar(k) * Scalar(2 * ell + 2 * k + 1));
    sum += term;
    if (std::abs(term) < std::abs(sum) * Scalar(1e-18)) break;
  }
  return std::pow(x, ell + 1) * sum;
}

}  // namespace detail

template <typename Scalar>
RiccatiBessel<Scalar> riccati_bessel(int ell, Scalar x) {
  using std::cos;
  using std::sin;
  if (ell < 0 || ell > 2) {
    throw UnsupportedError("riccati_bessel: only l = 0, 1, 2 are implemented");
  }
  if (!(x > Scalar(0))) {
    throw DomainError("riccati_bessel: argument must be positive");
  }
  const Scalar s = sin(x);
  const Scalar c = cos(x);
  // l = 0 and the l - 1 values needed by the derivative recurrence
  // f_l' = f_{l-1} - l f_l / x.
  Scalar j0 = s, n0 = -c;
  if (ell == 0) return {j0, c, n0, s};

  const bool series = x < Scalar(1);
  Scalar j1 = series ? detail::riccati_j_series(1, x) : s / x - c;
  Scalar n1 = -c / x - s;
  if (ell == 1) return {j1, j0 - j1 / x, n1, n0 - n1 / x};

  const Scalar inv = Scalar(1) / x;
  Scalar j2 = series ? detail::riccati_j_series(2, x)
                     : (Scalar(3) * inv * inv - Scalar(1)) * s - Scalar(3) * c * inv;
  Scalar n2 = -(Scalar(3) * inv * inv - Scalar(1)) * c - Scalar(3) * s * inv;
  return {j2, j1 - Scalar(2) * j2 * inv, n2, n1 - Scalar(2) * n2 * inv};
}

}  // namespace cirmag
