#pragma once

// Shot simulation, maximum-likelihood field estimation and the CRLB
// saturation study.

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cirmag/estimation.hpp"

namespace cirmag {

/// Philox4x32-10 (Salmon, Moraes, Dror, Shaw, SC'11).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;
  static Counter block(Counter ctr, Key key);
};

/// Stream `stream` of generator `seed`: key = seed, counter words
/// (draw_lo, draw_hi, stream_lo, stream_hi).  Each block yields four words.
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint64_t stream);

  std::uint32_t next_u32();
  /// Uniform on [0, 1) with 53 random bits.
  double next_double();

 private:
  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint64_t block_index_ = 0;
  Philox4x32::Counter buffer_{};
  int used_ = 4;
};

/// Binomial(n, p): inversion for n min(p, 1-p) < 10, otherwise BTRS
/// (Hormann's transformed rejection with squeeze).
std::uint64_t binomial_draw(PhiloxStream& rng, std::uint64_t n, double p);

/// ln(k!) accurate to about 1e-13.
double log_factorial(std::uint64_t k);

struct ShotRecord {
  std::vector<std::uint64_t> counts;  ///< transmitted atoms per tube
  std::uint64_t shots = 0;            ///< N per tube
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// n_i ~ Binomial(N, T(B(r_i))).  Tube i draws from stream
/// (stream_base << 32) + i, so records are reproducible from (seed, stream_base).
ShotRecord simulate_shots(const TubeArray& array, const FieldModel& field,
                          const TransmissionModel& model, std::uint64_t N, std::uint64_t seed,
                          std::uint64_t stream_base = 0);

/// sum_i n_i ln T_i + (N - n_i) ln(1 - T_i), T clamped to [eps, 1 - eps].
double log_likelihood(const ShotRecord& record, const TubeArray& array, const FieldModel& gamma,
                      const TransmissionModel& model);

struct MleOptions {
  unsigned mask = kParamB0 | kParamBx;
  FieldModel lower;  ///< search box; fixed parameters are taken from `lower`
  FieldModel upper;
  int grid_points = 21;
  double tolerance = 1e-6;  ///< simplex diameter, fraction of the box
  int max_iterations = 4000;
};

struct EstimateResult {
  FieldModel gamma_hat;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  unsigned mask = 0;
};

/// Grid search over the box followed by Nelder-Mead in box-normalized
/// coordinates.  A flat likelihood (no information) is reported as not
/// converged.
EstimateResult mle(const ShotRecord& record, const TubeArray& array,
                   const TransmissionModel& model, const MleOptions& options);

/// B0 | Bx, plus By when the array has two or more rows and the 3x3 FIM is
/// regular.
unsigned estimable_parameters(const TubeArray& array, const FisherMatrix3d& F);

struct StudyOptions {
  std::vector<std::uint64_t> N_list{100, 1000, 10000};
  int trials = 200;
  std::uint64_t seed = 1;
  unsigned mask = kParamB0 | kParamBx;
  double bounds_sigma = 10.0;  ///< search box half-width in CRLB units
  int bootstrap = 1000;
  double h0 = 1e-5;
  int threads = 1;
};

struct StudyRow {
  std::uint64_t N = 0;
  int trials = 0;
  std::string param;
  double empirical_var = 0.0;
  double crlb = 0.0;  ///< [F^-1]_ii / N
  double ratio = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int converged = 0;
};

struct StudyResult {
  std::vector<StudyRow> rows;
  std::vector<Eigen::Matrix3d> covariance;  ///< empirical, per N
  std::vector<double> median_loglik_gap;    ///< median of loglik(mle) - loglik(truth)
  FisherMatrix3d fisher = FisherMatrix3d::Zero();
};

/// Var of the MLE over `trials` simulated records per N, against the CRLB at
/// the truth.  Percentile bootstrap (95%) intervals on the variance ratio.
StudyResult crlb_saturation_study(const TubeArray& array, const FieldModel& truth,
                                  const TransmissionModel& model, const StudyOptions& options);

}  // namespace cirmag
