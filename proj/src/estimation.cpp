#include "cirmag/estimation.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>

#include "cirmag/parallel.hpp"

namespace cirmag {

namespace {

constexpr int kMaxStepHalvings = 12;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

double central(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Selected indices of a parameter mask, in order B0, Bx, By.
std::vector<int> selected(unsigned mask) {
  std::vector<int> idx;
  for (int i = 0; i < 3; ++i) {
    if (mask & (1u << i)) idx.push_back(i);
  }
  return idx;
}

const char* param_name(int i) {
  static const char* names[] = {"B0", "Bx", "By"};
  return names[i];
}

struct NormalizedBlock {
  Eigen::MatrixXd block;
  Eigen::VectorXd scale;  // 1/sqrt(diag)
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  bool zero_diagonal = false;
  int zero_index = -1;
};

NormalizedBlock normalize(const FisherMatrix3d& F, const std::vector<int>& idx) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  NormalizedBlock nb;
  nb.block.resize(n, n);
  nb.scale.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) nb.block(i, j) = F(idx[i], idx[j]);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = nb.block(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) {
      nb.zero_diagonal = true;
      nb.zero_index = static_cast<int>(i);
      nb.scale(i) = 0.0;
    } else {
      nb.scale(i) = 1.0 / std::sqrt(d);
    }
  }
  if (!nb.zero_diagonal) {
    const Eigen::MatrixXd normed = nb.scale.asDiagonal() * nb.block * nb.scale.asDiagonal();
    nb.eig.compute(normed);
  }
  return nb;
}

std::string null_direction(const NormalizedBlock& nb, const std::vector<int>& idx) {
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx.size()));
  if (nb.zero_diagonal) {
    dir(nb.zero_index) = 1.0;
  } else {
    dir = nb.scale.asDiagonal() * nb.eig.eigenvectors().col(0);
    dir /= dir.cwiseAbs().maxCoeff();
  }
  std::string out;
  char buf[64];
  for (Eigen::Index i = 0; i < dir.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%+.3e*d%s", i ? " " : "", dir(i), param_name(idx[i]));
    out += buf;
  }
  return out;
}

}  // namespace

Derivative richardson_derivative(const std::function<double(double)>& f, double x, double h0) {
  if (!(h0 > 0.0)) throw DomainError("richardson_derivative: step must be positive");
  const double fx = std::abs(f(x));
  double h = h0;
  for (int attempt = 0; attempt < kMaxStepHalvings; ++attempt) {
    const double d1 = central(f, x, h);
    const double d2 = central(f, x, h / 2.0);
    const double diff = std::abs(d1 - d2);
    const double scale = std::max(std::abs(d1), std::abs(d2));
    const double roundoff = 1e-7 * fx / h;
    if (std::isfinite(d1) && std::isfinite(d2) && (diff <= 0.1 * scale || diff <= roundoff)) {
      return {(4.0 * d2 - d1) / 3.0, diff / 3.0, h};
    }
    h /= 4.0;
  }
  h *= 4.0;
  throw DerivativeError("derivative did not converge near B = " + std::to_string(x) +
                            "; a narrow feature or pole lies inside the bracket",
                        x - h, x + h);
}

SlopeSample dT_dB(const TransmissionModel& model, double B, double h0) {
  SlopeSample out;
  const TransmissionSample s = model.sample(B);
  out.T = s.T;
  out.R = s.R;
  if (std::isfinite(s.phase)) {
    // T = cos^2(theta): differentiate theta, which stays smooth where T
    // touches 0 or 1.  Branch jumps by pi are removed relative to B.
    const double theta = s.phase;
    auto unwrapped = [&](double b) {
      const double t = model.sample(b).phase;
      return t - std::numbers::pi * std::round((t - theta) / std::numbers::pi);
    };
    out.dT = richardson_derivative(unwrapped, B, h0);
    const double scale = -std::sin(2.0 * theta);
    out.dT.value *= scale;
    out.dT.error *= std::abs(scale);
  } else if (s.T > 0.5) {
    out.dT = richardson_derivative([&](double b) { return model.sample(b).R; }, B, h0);
    out.dT.value = -out.dT.value;
  } else {
    out.dT = richardson_derivative([&](double b) { return model.sample(b).T; }, B, h0);
  }
  return out;
}

FisherValue fisher_single(double T, double R, double dTdB) {
  FisherValue out;
  out.saturated = T <= kClampEpsilon || R <= kClampEpsilon;
  const double t = std::clamp(T, kClampEpsilon, 1.0);
  const double r = std::clamp(R, kClampEpsilon, 1.0);
  out.F = dTdB * dTdB / (t * r);
  return out;
}

FisherValue fisher_single(double T, double dTdB) { return fisher_single(T, 1.0 - T, dTdB); }

double fisher_two_outcome(double T, double dTdB) {
  // p(transmit) = T, p(reflect) = 1 - T, derivatives +-dTdB
  return dTdB * dTdB / T + dTdB * dTdB / (1.0 - T);
}

std::vector<FisherPoint> single_tube_uncertainty(const TransmissionModel& model,
                                                 const std::vector<double>& B_grid, double h0,
                                                 int threads) {
  std::vector<FisherPoint> out(B_grid.size());
  parallel_for(B_grid.size(), threads, [&](std::size_t i) {
    FisherPoint& pt = out[i];
    pt.B = B_grid[i];
    try {
      const SlopeSample s = dT_dB(model, pt.B, h0);
      const FisherValue fv = fisher_single(s.T, s.R, s.dT.value);
      pt.T = s.T;
      pt.dTdB = s.dT.value;
      pt.F = fv.F;
      pt.dB = 1.0 / std::sqrt(fv.F);
      if (fv.saturated) pt.flags |= kFlagSaturated;
    } catch (const DerivativeError&) {
      pt.T = model.transmission(pt.B);
      pt.dTdB = pt.F = pt.dB = kNaN;
      pt.flags |= kFlagPole;
    }
  });
  return out;
}

UncertaintyMinimum minimize_uncertainty(const TransmissionModel& model,
                                        const std::vector<double>& B_grid, double h0,
                                        int threads, int candidates) {
  if (B_grid.size() < 3) throw DomainError("minimize_uncertainty needs at least 3 grid points");
  auto value = [](const FisherPoint& p) { return std::isnan(p.dB) ? kInf : p.dB; };
  const std::vector<FisherPoint> coarse = single_tube_uncertainty(model, B_grid, h0, threads);
  std::vector<double> v(coarse.size());
  std::transform(coarse.begin(), coarse.end(), v.begin(), value);
  std::vector<std::size_t> order = local_minima(v);
  order.push_back(static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin()));
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  order.erase(std::unique(order.begin(), order.end()), order.end());
  if (order.size() > static_cast<std::size_t>(candidates)) order.resize(candidates);

  UncertaintyMinimum best;
  for (const std::size_t i : order) {
    if (v[i] < best.dB) best = {B_grid[i], v[i]};
    double lo = B_grid[i == 0 ? 0 : i - 1];
    double hi = B_grid[std::min(i + 1, B_grid.size() - 1)];
    constexpr int kZoomPoints = 21;
    for (int level = 0; level < 12; ++level) {
      std::vector<double> g(kZoomPoints);
      for (int j = 0; j < kZoomPoints; ++j) g[j] = lo + (hi - lo) * j / (kZoomPoints - 1);
      const std::vector<FisherPoint> fine = single_tube_uncertainty(model, g, h0, threads);
      std::size_t jb = 0;
      for (std::size_t j = 1; j < fine.size(); ++j) {
        if (value(fine[j]) < value(fine[jb])) jb = j;
      }
      if (value(fine[jb]) < best.dB) best = {g[jb], value(fine[jb])};
      lo = g[jb == 0 ? 0 : jb - 1];
      hi = g[std::min<std::size_t>(jb + 1, kZoomPoints - 1)];
    }
  }
  return best;
}

double mid_fringe_near(const TransmissionModel& model, double B_start, double span) {
  auto excess = [&](double B) { return model.sample(B).T - 0.5; };
  const double f0 = excess(B_start);
  if (f0 == 0.0) return B_start;
  constexpr int kSteps = 2000;
  double best = B_start;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const double dir : {-1.0, 1.0}) {
    double lo = B_start, f_lo = f0;
    for (int i = 1; i <= kSteps; ++i) {
      const double hi = B_start + dir * span * i / kSteps;
      const double f_hi = excess(hi);
      if ((f_lo < 0.0) != (f_hi < 0.0)) {
        double a = lo, b = hi, fa = f_lo;
        for (int it = 0; it < 100 && a != b; ++it) {
          const double m = 0.5 * (a + b);
          if (m == a || m == b) break;
          const double fm = excess(m);
          if ((fm < 0.0) == (fa < 0.0)) {
            a = m;
            fa = fm;
          } else {
            b = m;
          }
        }
        const double root = 0.5 * (a + b);
        if (std::abs(root - B_start) < best_dist) {
          best = root;
          best_dist = std::abs(root - B_start);
        }
        break;
      }
      lo = hi;
      f_lo = f_hi;
    }
  }
  return best;
}

TubeArray TubeArray::square_grid(int mx, int my, double spacing_mm) {
  if (mx < 1 || my < 1) throw ConfigError("tube array needs Mx, My >= 1");
  if (!(spacing_mm > 0.0)) throw ConfigError("tube spacing must be positive");
  TubeArray a;
  a.mx = mx;
  a.my = my;
  a.spacing = spacing_mm;
  a.positions.reserve(static_cast<std::size_t>(mx) * static_cast<std::size_t>(my));
  for (int j = 0; j < my; ++j) {
    for (int i = 0; i < mx; ++i) {
      a.positions.emplace_back((i - 0.5 * (mx - 1)) * spacing_mm,
                               (j - 0.5 * (my - 1)) * spacing_mm);
    }
  }
  return a;
}

TubeArray TubeArray::from_positions(std::vector<Eigen::Vector2d> positions) {
  TubeArray a;
  a.positions = std::move(positions);
  a.mx = static_cast<int>(a.positions.size());
  a.my = 1;
  a.validate();
  return a;
}

void TubeArray::validate() const {
  if (positions.empty()) throw ConfigError("tube array is empty");
  std::vector<std::pair<double, double>> sorted;
  sorted.reserve(positions.size());
  for (const auto& r : positions) {
    if (!r.allFinite()) throw ConfigError("tube position is not finite");
    sorted.emplace_back(r.x(), r.y());
  }
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("tube positions must be distinct");
  }
}

FisherMatrix3d fim_tube(double T, double dTdB, double x, double y) {
  return fim_tube(fisher_single(T, dTdB).F, x, y);
}

ArrayFisher fim_array(const TubeArray& array, const FieldModel& field,
                      const TransmissionModel& model, double h0) {
  const std::size_t M = array.size();
  std::vector<double> B(M);
  for (std::size_t i = 0; i < M; ++i) {
    B[i] = field.at(array.positions[i]);
    if (!std::isfinite(B[i])) throw DomainError("local field is not finite");
  }
  std::vector<double> unique = B;
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  std::vector<FisherValue> info(unique.size());
  for (std::size_t u = 0; u < unique.size(); ++u) {
    const SlopeSample s = dT_dB(model, unique[u], h0);
    info[u] = fisher_single(s.T, s.R, s.dT.value);
  }
  ArrayFisher out;
  out.tubes = M;
  for (std::size_t i = 0; i < M; ++i) {
    const auto u = static_cast<std::size_t>(
        std::lower_bound(unique.begin(), unique.end(), B[i]) - unique.begin());
    const FisherValue& fv = info[u];
    if (fv.saturated) ++out.saturated;
    out.F += fim_tube(fv.F, array.positions[i].x(), array.positions[i].y());
  }
  if (out.saturated == M) throw EstimabilityError("every tube is saturated; the FIM carries no information");
  return out;
}

int fim_rank(const FisherMatrix3d& F, unsigned mask) {
  const std::vector<int> idx = selected(mask);
  const NormalizedBlock nb = normalize(F, idx);
  int rank = 0;
  if (nb.zero_diagonal) {
    // drop the empty parameter and count the rest
    unsigned reduced = mask & ~(1u << idx[nb.zero_index]);
    return reduced ? fim_rank(F, reduced) : 0;
  }
  const double top = nb.eig.eigenvalues().maxCoeff();
  for (Eigen::Index i = 0; i < nb.eig.eigenvalues().size(); ++i) {
    if (nb.eig.eigenvalues()(i) > top / kSingularCondition) ++rank;
  }
  return rank;
}

CrlbResult crlb(const FisherMatrix3d& F, double N, unsigned mask, bool throw_on_singular) {
  if (!(N > 0.0)) throw DomainError("crlb: N must be positive");
  const std::vector<int> idx = selected(mask & kParamAll);
  if (idx.empty()) throw DomainError("crlb: no parameters selected");
  CrlbResult out;
  const NormalizedBlock nb = normalize(F, idx);
  double cond = std::numeric_limits<double>::infinity();
  if (!nb.zero_diagonal) {
    const double lo = nb.eig.eigenvalues()(0);
    const double hi = nb.eig.eigenvalues()(nb.eig.eigenvalues().size() - 1);
    if (lo > 0.0) cond = hi / lo;
  }
  out.condition = cond;
  if (!(cond <= kSingularCondition)) {
    if (throw_on_singular) {
      throw EstimabilityError("FIM block is singular (normalized condition " +
                              std::to_string(cond) + "); unidentifiable direction: " +
                              null_direction(nb, idx));
    }
    out.flags |= kFlagSingular;
    return out;
  }
  Eigen::MatrixXd inv;
  switch (idx.size()) {
    case 1:
      inv = adjugate_inverse<double, 1>(nb.block.topLeftCorner<1, 1>());
      break;
    case 2:
      inv = adjugate_inverse<double, 2>(nb.block.topLeftCorner<2, 2>());
      break;
    default:
      inv = adjugate_inverse<double, 3>(nb.block.topLeftCorner<3, 3>());
      break;
  }
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = 0; j < idx.size(); ++j) {
      out.inverse(idx[i], idx[j]) = inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    out.sigma(idx[i]) = std::sqrt(inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) / N);
  }
  return out;
}

std::vector<MapPoint> uncertainty_map(const TubeArray& array, const TransmissionModel& model,
                                      const std::vector<double>& B0_grid,
                                      const std::vector<double>& Bx_grid, double h0,
                                      int threads) {
  array.validate();
  const std::size_t nx = Bx_grid.size();
  std::vector<MapPoint> out(B0_grid.size() * nx);
  parallel_for(out.size(), threads, [&](std::size_t k) {
    MapPoint& pt = out[k];
    pt.B0 = B0_grid[k / nx];
    pt.Bx = Bx_grid[k % nx];
    try {
      const ArrayFisher af = fim_array(array, {pt.B0, pt.Bx, 0.0}, model, h0);
      const CrlbResult cr = crlb(af.F, 1.0, kParamB0 | kParamBx, false);
      pt.dB0 = cr.sigma(0);
      pt.dBx = cr.sigma(1);
      pt.flags |= cr.flags;
      if (af.saturated > 0) pt.flags |= kFlagSaturated;
    } catch (const EstimabilityError&) {
      pt.dB0 = pt.dBx = kNaN;
      pt.flags |= kFlagSaturated | kFlagSingular;
    } catch (const DerivativeError&) {
      pt.dB0 = pt.dBx = kNaN;
      pt.flags |= kFlagPole;
    }
  });
  return out;
}

std::vector<std::size_t> local_minima(const std::vector<double>& v) {
  std::vector<std::size_t> out;
  const std::size_t n = v.size();
  std::size_t i = 1;
  while (i + 1 < n) {
    if (std::isnan(v[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && v[j + 1] == v[i]) ++j;
    if (j + 1 >= n) break;
    const double left = v[i - 1];
    const double right = v[j + 1];
    if (!std::isnan(left) && !std::isnan(right) && left > v[i] && right > v[i]) {
      out.push_back(i);
    }
    i = j + 1;
  }
  return out;
}

}  // namespace cirmag
