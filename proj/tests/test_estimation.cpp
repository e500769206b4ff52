#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <random>

#include "cirmag/estimation.hpp"

using namespace cirmag;

namespace {

// sum over all 2^M outcomes of grad p grad p^T / p
FisherMatrix3d brute_force_fim(const std::vector<double>& T, const std::vector<double>& dT,
                               const std::vector<Eigen::Vector2d>& r) {
  const std::size_t M = T.size();
  FisherMatrix3d F = FisherMatrix3d::Zero();
  for (std::uint64_t mask = 0; mask < (1ull << M); ++mask) {
    double p = 1.0;
    Eigen::Vector3d grad_log = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < M; ++i) {
      const bool hit = (mask >> i) & 1u;
      p *= hit ? T[i] : 1.0 - T[i];
      const double dlog = hit ? dT[i] / T[i] : -dT[i] / (1.0 - T[i]);
      grad_log += dlog * Eigen::Vector3d(1.0, r[i].x(), r[i].y());
    }
    F += p * grad_log * grad_log.transpose();
  }
  return F;
}

FisherMatrix3d sum_fim(const std::vector<double>& T, const std::vector<double>& dT,
                       const std::vector<Eigen::Vector2d>& r) {
  FisherMatrix3d F = FisherMatrix3d::Zero();
  for (std::size_t i = 0; i < T.size(); ++i) F += fim_tube(T[i], dT[i], r[i].x(), r[i].y());
  return F;
}

}  // namespace

TEST_CASE("richardson derivative") {
  const auto d = richardson_derivative([](double x) { return std::sin(x); }, 0.3, 1e-2);
  CHECK(d.value == doctest::Approx(std::cos(0.3)).epsilon(1e-9));
  CHECK(d.error < 1e-5);
  CHECK_THROWS_AS(
      richardson_derivative([](double x) { return x > 0.0 ? 1.0 : 0.0; }, 0.0, 1e-2),
      DerivativeError);
}

TEST_CASE("single-tube Fisher information") {
  CHECK(fisher_single(0.3, 0.2).F == doctest::Approx(0.04 / 0.21));
  CHECK(fisher_single(0.3, 0.7, 0.2).F == doctest::Approx(0.04 / 0.21));
  CHECK(fisher_two_outcome(0.3, 0.2) == doctest::Approx(fisher_single(0.3, 0.2).F));
  CHECK(fisher_single(0.0, 0.1).saturated);
  CHECK(std::isfinite(fisher_single(0.0, 0.1).F));
  CHECK_FALSE(fisher_single(0.5, 0.1).saturated);
}

TEST_CASE("uncertainty of an analytic transmission curve") {
  // T = cos^2 B gives F = 4 everywhere away from the extremes.
  const FunctionTransmission model([](double B) { return std::pow(std::cos(B), 2); });
  std::vector<double> grid;
  for (int i = 1; i < 15; ++i) grid.push_back(0.1 * i);
  const auto pts = single_tube_uncertainty(model, grid, 1e-3, 3);
  for (const auto& p : pts) {
    CHECK(p.F == doctest::Approx(4.0).epsilon(1e-6));
    CHECK(p.dB == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(p.dTdB == doctest::Approx(-std::sin(2 * p.B)).epsilon(1e-7));
  }
}

TEST_CASE("uncertainty minimum zooms below the grid spacing") {
  // T = x^2/(1 + x^2): F^{-1/2} = w (1 + x^2)/2, a dip of width w = 1e-5
  const FunctionTransmission model([](double B) {
    const double x = (B - 0.0123456) / 1e-5;
    return x * x / (1.0 + x * x);
  });
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(-0.5 + 0.01 * i);
  const auto m = minimize_uncertainty(model, grid, 1e-7, 2);
  CHECK(m.B == doctest::Approx(0.0123456).epsilon(1e-6).scale(1.0));
  CHECK(m.dB == doctest::Approx(5e-6).epsilon(1e-4));
}

TEST_CASE("array FIM equals the brute-force outcome sum") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> t(0.05, 0.95), s(-2.0, 2.0), x(-1.0, 1.0);
  for (int cfg = 0; cfg < 10; ++cfg) {
    const std::size_t M = 1 + cfg % 8;
    std::vector<double> T(M), dT(M);
    std::vector<Eigen::Vector2d> r(M);
    for (std::size_t i = 0; i < M; ++i) {
      T[i] = t(gen);
      dT[i] = s(gen);
      r[i] = {x(gen), x(gen)};
    }
    const FisherMatrix3d a = sum_fim(T, dT, r);
    const FisherMatrix3d b = brute_force_fim(T, dT, r);
    CHECK((a - b).norm() <= 1e-10 * b.norm());
  }
}

TEST_CASE("FIM properties") {
  const FunctionTransmission model([](double B) { return 0.5 + 0.4 * std::sin(3.0 * B); });
  const FieldModel field{0.1, 0.2, -0.1};
  TubeArray array = TubeArray::square_grid(4, 3, 0.5);
  const ArrayFisher full = fim_array(array, field, model, 1e-4);
  CHECK(full.tubes == 12);

  SUBCASE("adding a tube never removes information") {
    TubeArray fewer = array;
    fewer.positions.pop_back();
    const FisherMatrix3d diff = full.F - fim_array(fewer, field, model, 1e-4).F;
    const Eigen::SelfAdjointEigenSolver<FisherMatrix3d> eig(diff);
    CHECK(eig.eigenvalues().minCoeff() > -1e-12 * full.F.norm());
  }
  SUBCASE("tube order is irrelevant") {
    TubeArray shuffled = array;
    std::reverse(shuffled.positions.begin(), shuffled.positions.end());
    CHECK((fim_array(shuffled, field, model, 1e-4).F - full.F).norm() < 1e-12 * full.F.norm());
  }
  SUBCASE("length units rescale the gradient block") {
    // Positions 1000x larger with gradients 1000x smaller give the same fields.
    TubeArray scaled = array;
    for (auto& p : scaled.positions) p *= 1000.0;
    const FieldModel f2{field.B0, field.Bx / 1000.0, field.By / 1000.0};
    const FisherMatrix3d F2 = fim_array(scaled, f2, model, 1e-4).F;
    const Eigen::Vector3d s(1.0, 1000.0, 1000.0);
    const FisherMatrix3d expected = s.asDiagonal() * full.F * s.asDiagonal();
    CHECK((F2 - expected).norm() < 1e-9 * expected.norm());
    const auto c1 = crlb(full.F, 100.0, kParamAll);
    const auto c2 = crlb(F2, 100.0, kParamAll);
    CHECK(c2.sigma[0] == doctest::Approx(c1.sigma[0]).epsilon(1e-8));
    CHECK(c2.sigma[1] == doctest::Approx(c1.sigma[1] / 1000.0).epsilon(1e-8));
  }
  SUBCASE("crlb matches the dense inverse") {
    const auto c = crlb(full.F, 50.0, kParamAll);
    const Eigen::Matrix3d inv = full.F.inverse();
    for (int i = 0; i < 3; ++i) CHECK(c.sigma[i] == doctest::Approx(std::sqrt(inv(i, i) / 50.0)));
    const auto c2 = crlb(full.F, 50.0, kParamB0 | kParamBx);
    const Eigen::Matrix2d inv2 = full.F.topLeftCorner<2, 2>().inverse();
    CHECK(c2.sigma[1] == doctest::Approx(std::sqrt(inv2(1, 1) / 50.0)));
    CHECK(std::isnan(c2.sigma[2]));
  }
}

TEST_CASE("rank and estimability") {
  const FisherMatrix3d one = fim_tube(0.3, 0.5, 0.2, -0.4);
  CHECK(fim_rank(one) == 1);
  const FisherMatrix3d two = one + fim_tube(0.6, -0.2, -0.1, 0.3);
  CHECK(fim_rank(two) == 2);
  CHECK_THROWS_AS(crlb(two, 1.0, kParamAll), EstimabilityError);
  CHECK((crlb(two, 1.0, kParamAll, false).flags & kFlagSingular) != 0);
  const FisherMatrix3d three = two + fim_tube(0.5, 0.3, 0.4, 0.4);
  CHECK(fim_rank(three) == 3);
  // collinear tubes along y = 2x
  FisherMatrix3d line = FisherMatrix3d::Zero();
  for (int i = 0; i < 5; ++i) line += fim_tube(0.4, 0.3 + 0.1 * i, 0.1 * i, 0.2 * i);
  CHECK(fim_rank(line) == 2);
  CHECK((crlb(line, 1.0, kParamAll, false).flags & kFlagSingular) != 0);
  CHECK(fim_rank(line, kParamB0 | kParamBx) == 2);
  try {
    crlb(line, 1.0, kParamAll);
    FAIL("expected EstimabilityError");
  } catch (const EstimabilityError& e) {
    CHECK(std::string(e.what()).find("dBx") != std::string::npos);
  }
}

TEST_CASE("adjugate inverse") {
  Eigen::Matrix3d m;
  m << 4, 1, 0.5, 1, 3, 0.2, 0.5, 0.2, 2;
  CHECK((adjugate_inverse<double, 3>(m) - m.inverse()).norm() < 1e-14);
  const Eigen::Matrix2d m2 = m.topLeftCorner<2, 2>();
  CHECK((adjugate_inverse<double, 2>(m2) - m2.inverse()).norm() < 1e-14);
  const Eigen::Matrix<float, 1, 1> m1(4.0f);
  CHECK(adjugate_inverse<float, 1>(m1)(0, 0) == doctest::Approx(0.25));
}

TEST_CASE("tube arrays") {
  const TubeArray a = TubeArray::square_grid(3, 2, 0.5);
  REQUIRE(a.size() == 6);
  CHECK(a.positions[0].x() == doctest::Approx(-0.5));
  CHECK(a.positions[1].x() == doctest::Approx(0.0));
  CHECK(a.positions[0].y() == doctest::Approx(-0.25));
  CHECK(a.positions[3].y() == doctest::Approx(0.25));
  CHECK_THROWS_AS(TubeArray::from_positions({}), ConfigError);
  CHECK_THROWS_AS(TubeArray::from_positions({{0.0, 0.0}, {0.0, 0.0}}), ConfigError);
  CHECK_THROWS_AS(TubeArray::square_grid(0, 2, 1.0), ConfigError);
}

TEST_CASE("saturated arrays are not estimable") {
  const FunctionTransmission flat([](double) { return 1.0; });
  const TubeArray a = TubeArray::square_grid(2, 2, 1.0);
  CHECK_THROWS_AS(fim_array(a, FieldModel{}, flat, 1e-3), EstimabilityError);
}

TEST_CASE("uncertainty map of an analytic curve") {
  const FunctionTransmission model([](double B) { return std::pow(std::cos(B), 2); });
  const TubeArray a = TubeArray::square_grid(3, 3, 0.1);
  const auto map = uncertainty_map(a, model, {0.3, 0.5}, {0.0, 0.1}, 1e-4, 2);
  REQUIRE(map.size() == 4);
  CHECK(map[1].B0 == doctest::Approx(0.3));
  CHECK(map[1].Bx == doctest::Approx(0.1));
  // F_i = 4 for every tube
  FisherMatrix3d F = FisherMatrix3d::Zero();
  for (const auto& r : a.positions) F += fim_tube(4.0, r.x(), r.y());
  const Eigen::Matrix2d inv = F.topLeftCorner<2, 2>().inverse();
  for (const auto& p : map) {
    CHECK(p.dB0 == doctest::Approx(std::sqrt(inv(0, 0))).epsilon(1e-6));
    CHECK(p.dBx == doctest::Approx(std::sqrt(inv(1, 1))).epsilon(1e-6));
  }
}

TEST_CASE("local minima") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK(local_minima({3, 1, 2, 0, 5}) == std::vector<std::size_t>{1, 3});
  CHECK(local_minima({3, 1, 1, 1, 2}).size() == 1);
  CHECK(local_minima({3, 1, nan, 0, 5}).empty());
  CHECK(local_minima({nan, 3, 1, 2, nan}) == std::vector<std::size_t>{2});
  CHECK(local_minima({1, 2, 3}).empty());
}

TEST_CASE("memoized transmission tracks the exact model") {
  PhysicsSetup s;
  s.resonance = {0.0, 0.1, 100.0};
  s.trap.waves.p = true;
  const ExactTransmission exact(s);
  const MemoizedTransmission memo(exact, -0.3, 0.3, 1e-4, 4);
  CHECK(memo.nodes() > 6000);
  for (double B : {-0.25, -0.0123, 0.0311, 0.1, 0.1049, 0.2877}) {
    CAPTURE(B);
    CHECK(memo.transmission(B) == doctest::Approx(exact.transmission(B)).epsilon(1e-6).scale(1.0));
  }
  CHECK_THROWS_AS(memo.sample(0.5), DomainError);
  // the phase path and a plain difference of T agree in a smooth region
  const SlopeSample sl = dT_dB(memo, 0.2, 1e-5);
  const double fd = (memo.transmission(0.2 + 1e-6) - memo.transmission(0.2 - 1e-6)) / 2e-6;
  CHECK(sl.dT.value == doctest::Approx(fd).epsilon(1e-4));
}

TEST_CASE("mid-fringe point next to a dip") {
  // T = x^2/(1 + x^2) crosses 1/2 at x = +-1
  const FunctionTransmission model([](double B) {
    const double x = (B - 0.2) / 1e-3;
    return x * x / (1.0 + x * x);
  });
  const double B = mid_fringe_near(model, 0.2001, 0.01);
  CHECK(B == doctest::Approx(0.201).epsilon(1e-9).scale(1.0));
  CHECK(model.transmission(B) == doctest::Approx(0.5).epsilon(1e-9));
  const FunctionTransmission flat([](double) { return 0.9; });
  CHECK(mid_fringe_near(flat, 0.3, 0.01) == 0.3);
}
