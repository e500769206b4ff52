#include "cirmag/mc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "cirmag/parallel.hpp"
#include "cirmag/summation.hpp"

namespace cirmag {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;
constexpr std::uint64_t kBootstrapStream = 0xB0075787ull << 32;

void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

// Tubes that see the same local field for every admissible parameter value
// are pooled: their counts add and the likelihood is unchanged.
struct Group {
  Eigen::Vector2d r;
  std::uint64_t successes = 0;
  std::uint64_t trials = 0;
};

std::vector<Group> pool(const ShotRecord& record, const TubeArray& array, bool y_matters) {
  std::map<std::pair<double, double>, Group> groups;
  for (std::size_t i = 0; i < array.size(); ++i) {
    const Eigen::Vector2d& r = array.positions[i];
    Group& g = groups[{r.x(), y_matters ? r.y() : 0.0}];
    g.r = Eigen::Vector2d(r.x(), y_matters ? r.y() : 0.0);
    g.successes += record.counts[i];
    g.trials += record.shots;
  }
  std::vector<Group> out;
  out.reserve(groups.size());
  for (auto& [key, g] : groups) out.push_back(g);
  return out;
}

double pooled_loglik(const std::vector<Group>& groups, const FieldModel& gamma,
                     const TransmissionModel& model) {
  CompensatedSum<double> sum;
  for (const Group& g : groups) {
    const TransmissionSample s = model.sample(gamma.at(g.r));
    const double t = std::clamp(s.T, kClampEpsilon, 1.0 - kClampEpsilon);
    const double r = std::clamp(s.R, kClampEpsilon, 1.0 - kClampEpsilon);
    const auto fail = g.trials - g.successes;
    if (g.successes) sum.add(static_cast<double>(g.successes) * std::log(t));
    if (fail) sum.add(static_cast<double>(fail) * std::log(r));
  }
  return sum.value();
}

double& component(FieldModel& f, int i) { return i == 0 ? f.B0 : (i == 1 ? f.Bx : f.By); }
double component(const FieldModel& f, int i) { return i == 0 ? f.B0 : (i == 1 ? f.Bx : f.By); }

}  // namespace

Philox4x32::Counter Philox4x32::block(Counter c, Key k) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kPhiloxW0;
      k[1] += kPhiloxW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, c[0], hi0, lo0);
    mulhilo(kPhiloxM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

PhiloxStream::PhiloxStream(std::uint64_t seed, std::uint64_t stream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      stream_(stream) {}

std::uint32_t PhiloxStream::next_u32() {
  if (used_ == 4) {
    buffer_ = Philox4x32::block({static_cast<std::uint32_t>(block_index_),
                                 static_cast<std::uint32_t>(block_index_ >> 32),
                                 static_cast<std::uint32_t>(stream_),
                                 static_cast<std::uint32_t>(stream_ >> 32)},
                                key_);
    ++block_index_;
    used_ = 0;
  }
  return buffer_[used_++];
}

double PhiloxStream::next_double() {
  const std::uint64_t hi = next_u32() >> 5;  // 27 bits
  const std::uint64_t lo = next_u32() >> 6;  // 26 bits
  return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
}

double log_factorial(std::uint64_t k) {
  static const std::array<double, 256> table = [] {
    std::array<double, 256> t{};
    for (std::size_t i = 1; i < t.size(); ++i) t[i] = t[i - 1] + std::log(static_cast<double>(i));
    return t;
  }();
  if (k < table.size()) return table[k];
  const double x = static_cast<double>(k) + 1.0;
  const double x2 = x * x;
  return (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi) +
         (1.0 / 12.0 - (1.0 / 360.0 - 1.0 / (1260.0 * x2)) / x2) / x;
}

std::uint64_t binomial_draw(PhiloxStream& rng, std::uint64_t n, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("binomial_draw: p outside [0, 1]");
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  if (p > 0.5) return n - binomial_draw(rng, n, 1.0 - p);
  const double nd = static_cast<double>(n);
  const double q = 1.0 - p;
  if (nd * p < 10.0) {
    // inversion by sequential search
    const double s = p / q;
    const double a = (nd + 1.0) * s;
    for (;;) {
      double r = std::pow(q, nd);
      double u = rng.next_double();
      std::uint64_t x = 0;
      while (u > r) {
        u -= r;
        ++x;
        if (x > n) break;
        r *= a / static_cast<double>(x) - s;
      }
      if (x <= n) return x;
    }
  }
  const double spq = std::sqrt(nd * p * q);
  const double b = 1.15 + 2.53 * spq;
  const double a = -0.0873 + 0.0248 * b + 0.01 * p;
  const double c = nd * p + 0.5;
  const double v_r = 0.92 - 4.2 / b;
  const double alpha = (2.83 + 5.1 / b) * spq;
  const double lpq = std::log(p / q);
  const auto m = static_cast<std::uint64_t>(std::floor((nd + 1.0) * p));
  const double h = log_factorial(m) + log_factorial(n - m);
  for (;;) {
    const double u = rng.next_double() - 0.5;
    double v = rng.next_double();
    const double us = 0.5 - std::abs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + c);
    if (kf < 0.0 || kf > nd) continue;
    const auto k = static_cast<std::uint64_t>(kf);
    if (us >= 0.07 && v <= v_r) return k;
    v = std::log(v * alpha / (a / (us * us) + b));
    const double bound = h - log_factorial(k) - log_factorial(n - k) +
                         (static_cast<double>(k) - static_cast<double>(m)) * lpq;
    if (v <= bound) return k;
  }
}

ShotRecord simulate_shots(const TubeArray& array, const FieldModel& field,
                          const TransmissionModel& model, std::uint64_t N, std::uint64_t seed,
                          std::uint64_t stream_base) {
  ShotRecord rec;
  rec.shots = N;
  rec.seed = seed;
  rec.stream = stream_base;
  rec.counts.resize(array.size());
  for (std::size_t i = 0; i < array.size(); ++i) {
    const double T = std::clamp(model.sample(field.at(array.positions[i])).T, 0.0, 1.0);
    PhiloxStream rng(seed, (stream_base << 32) + i);
    rec.counts[i] = binomial_draw(rng, N, T);
  }
  return rec;
}

double log_likelihood(const ShotRecord& record, const TubeArray& array, const FieldModel& gamma,
                      const TransmissionModel& model) {
  if (record.counts.size() != array.size()) {
    throw DomainError("shot record and tube array sizes differ");
  }
  return pooled_loglik(pool(record, array, true), gamma, model);
}

EstimateResult mle(const ShotRecord& record, const TubeArray& array,
                   const TransmissionModel& model, const MleOptions& options) {
  if (record.counts.size() != array.size()) {
    throw DomainError("shot record and tube array sizes differ");
  }
  std::vector<int> free;
  for (int i = 0; i < 3; ++i) {
    if (options.mask & (1u << i)) free.push_back(i);
  }
  if (free.empty()) throw DomainError("mle: no free parameters");
  for (int i : free) {
    if (!(component(options.upper, i) > component(options.lower, i))) {
      throw DomainError("mle: empty search box");
    }
  }
  const bool y_matters = (options.mask & kParamBy) || options.lower.By != 0.0;
  const std::vector<Group> groups = pool(record, array, y_matters);
  const auto dim = free.size();

  auto to_field = [&](const Eigen::VectorXd& z) {
    FieldModel f = options.lower;
    for (std::size_t j = 0; j < dim; ++j) {
      const int i = free[j];
      const double t = std::clamp(z(static_cast<Eigen::Index>(j)), 0.0, 1.0);
      component(f, i) = component(options.lower, i) +
                        t * (component(options.upper, i) - component(options.lower, i));
    }
    return f;
  };
  auto cost = [&](const Eigen::VectorXd& z) {
    return -pooled_loglik(groups, to_field(z), model);
  };

  // grid stage
  const int g = std::max(options.grid_points, 2);
  std::size_t total = 1;
  for (std::size_t j = 0; j < dim; ++j) total *= static_cast<std::size_t>(g);
  Eigen::VectorXd best(static_cast<Eigen::Index>(dim));
  double best_cost = std::numeric_limits<double>::infinity();
  double worst_cost = -best_cost;
  Eigen::VectorXd z(static_cast<Eigen::Index>(dim));
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    for (std::size_t j = 0; j < dim; ++j) {
      z(static_cast<Eigen::Index>(j)) = static_cast<double>(rest % g) / (g - 1);
      rest /= g;
    }
    const double c = cost(z);
    if (c < best_cost) {
      best_cost = c;
      best = z;
    }
    worst_cost = std::max(worst_cost, c);
  }
  EstimateResult out;
  out.mask = options.mask;
  const bool flat = worst_cost - best_cost <= 1e-12 * (1.0 + std::abs(best_cost));

  // Nelder-Mead
  const auto n = static_cast<Eigen::Index>(dim);
  std::vector<Eigen::VectorXd> simplex(dim + 1, best);
  std::vector<double> f(dim + 1, best_cost);
  const double step = 1.0 / (g - 1);
  for (Eigen::Index j = 0; j < n; ++j) {
    simplex[j + 1](j) += best(j) + step <= 1.0 ? step : -step;
    f[j + 1] = cost(simplex[j + 1]);
  }
  auto diameter = [&] {
    double d = 0.0;
    for (std::size_t a = 0; a < simplex.size(); ++a) {
      for (std::size_t b = a + 1; b < simplex.size(); ++b) {
        d = std::max(d, (simplex[a] - simplex[b]).norm());
      }
    }
    return d;
  };
  auto project = [](Eigen::VectorXd v) { return Eigen::VectorXd(v.cwiseMax(0.0).cwiseMin(1.0)); };
  std::vector<std::size_t> order(dim + 1);
  int it = 0;
  bool converged = false;
  for (; it < options.max_iterations; ++it) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return f[a] < f[b]; });
    if (diameter() < options.tolerance) {
      converged = true;
      break;
    }
    const std::size_t hi = order.back();
    const std::size_t second = order[order.size() - 2];
    const std::size_t lo = order.front();
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) centroid += simplex[order[i]];
    centroid /= static_cast<double>(dim);
    const Eigen::VectorXd xr = project(centroid + (centroid - simplex[hi]));
    const double fr = cost(xr);
    if (fr < f[lo]) {
      const Eigen::VectorXd xe = project(centroid + 2.0 * (centroid - simplex[hi]));
      const double fe = cost(xe);
      if (fe < fr) {
        simplex[hi] = xe;
        f[hi] = fe;
      } else {
        simplex[hi] = xr;
        f[hi] = fr;
      }
    } else if (fr < f[second]) {
      simplex[hi] = xr;
      f[hi] = fr;
    } else {
      const bool outside = fr < f[hi];
      const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                         : Eigen::VectorXd(centroid + 0.5 * (simplex[hi] - centroid));
      const double fc = cost(xc);
      if (fc < (outside ? fr : f[hi])) {
        simplex[hi] = xc;
        f[hi] = fc;
      } else {
        for (std::size_t i = 1; i < order.size(); ++i) {
          const std::size_t v = order[i];
          simplex[v] = simplex[lo] + 0.5 * (simplex[v] - simplex[lo]);
          f[v] = cost(simplex[v]);
        }
      }
    }
  }
  const std::size_t argbest =
      static_cast<std::size_t>(std::min_element(f.begin(), f.end()) - f.begin());
  out.gamma_hat = to_field(simplex[argbest]);
  out.loglik = -f[argbest];
  out.iterations = it;
  out.converged = converged && !flat;
  return out;
}

unsigned estimable_parameters(const TubeArray& array, const FisherMatrix3d& F) {
  std::vector<double> ys;
  for (const auto& r : array.positions) ys.push_back(r.y());
  std::sort(ys.begin(), ys.end());
  const bool rows = std::unique(ys.begin(), ys.end()) - ys.begin() >= 2;
  if (rows && fim_rank(F, kParamAll) == 3) return kParamAll;
  return kParamB0 | kParamBx;
}

StudyResult crlb_saturation_study(const TubeArray& array, const FieldModel& truth,
                                  const TransmissionModel& model, const StudyOptions& options) {
  if (options.trials < 2) throw ConfigError("mc.trials must be at least 2");
  StudyResult result;
  result.fisher = fim_array(array, truth, model, options.h0).F;
  const CrlbResult bound = crlb(result.fisher, 1.0, options.mask);
  std::vector<int> free;
  for (int i = 0; i < 3; ++i) {
    if (options.mask & (1u << i)) free.push_back(i);
  }
  static const char* names[] = {"B0", "Bx", "By"};
  const auto trials = static_cast<std::size_t>(options.trials);

  for (std::size_t ni = 0; ni < options.N_list.size(); ++ni) {
    const std::uint64_t N = options.N_list[ni];
    if (N == 0) throw ConfigError("mc.N entries must be positive");
    MleOptions mo;
    mo.mask = options.mask;
    mo.lower = truth;
    mo.upper = truth;
    for (int i : free) {
      const double half = options.bounds_sigma * bound.sigma(i) / std::sqrt(static_cast<double>(N));
      component(mo.lower, i) -= half;
      component(mo.upper, i) += half;
    }
    std::vector<EstimateResult> est(trials);
    std::vector<double> gap(trials);
    parallel_for(trials, options.threads, [&](std::size_t t) {
      const ShotRecord rec =
          simulate_shots(array, truth, model, N, options.seed, ni * trials + t);
      est[t] = mle(rec, array, model, mo);
      gap[t] = est[t].loglik - log_likelihood(rec, array, truth, model);
    });

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (int i = 0; i < 3; ++i) {
      CompensatedSum<double> s;
      for (const auto& e : est) s.add(component(e.gamma_hat, i));
      mean(i) = s.value() / static_cast<double>(trials);
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        CompensatedSum<double> s;
        for (const auto& e : est) {
          s.add((component(e.gamma_hat, i) - mean(i)) * (component(e.gamma_hat, j) - mean(j)));
        }
        cov(i, j) = s.value() / static_cast<double>(trials - 1);
      }
    }
    result.covariance.push_back(cov);
    std::nth_element(gap.begin(), gap.begin() + static_cast<std::ptrdiff_t>(trials / 2), gap.end());
    result.median_loglik_gap.push_back(gap[trials / 2]);

    int converged = 0;
    for (const auto& e : est) converged += e.converged ? 1 : 0;

    for (int i : free) {
      StudyRow row;
      row.N = N;
      row.trials = options.trials;
      row.param = names[i];
      row.empirical_var = cov(i, i);
      row.crlb = bound.inverse(i, i) / static_cast<double>(N);
      row.ratio = row.empirical_var / row.crlb;
      row.converged = converged;
      std::vector<double> values(trials);
      for (std::size_t t = 0; t < trials; ++t) values[t] = component(est[t].gamma_hat, i);
      PhiloxStream rng(options.seed, kBootstrapStream + ni * 3 + static_cast<std::uint64_t>(i));
      std::vector<double> ratios(static_cast<std::size_t>(std::max(options.bootstrap, 1)));
      for (auto& r : ratios) {
        CompensatedSum<double> s1, s2;
        std::vector<double> sample(trials);
        for (auto& v : sample) {
          v = values[static_cast<std::size_t>(rng.next_double() * static_cast<double>(trials))];
          s1.add(v);
        }
        const double m = s1.value() / static_cast<double>(trials);
        for (double v : sample) s2.add((v - m) * (v - m));
        r = s2.value() / static_cast<double>(trials - 1) / row.crlb;
      }
      std::sort(ratios.begin(), ratios.end());
      const auto B = ratios.size();
      row.ci_lo = ratios[static_cast<std::size_t>(0.025 * static_cast<double>(B - 1))];
      row.ci_hi = ratios[static_cast<std::size_t>(std::ceil(0.975 * static_cast<double>(B - 1)))];
      result.rows.push_back(row);
    }
  }
  return result;
}

}  // namespace cirmag
