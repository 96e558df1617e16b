#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "collapse/profiles.hpp"

using namespace collapse;
namespace P = collapse::profiles;

namespace {

// continuum linearized operator applied through the closed-form derivatives
double L_of(P::Kind k, double y) {
  const double d2 = P::eval_deriv2(k, y);
  const double d1 = P::eval_deriv1(k, y);
  const double f = P::eval_profile(k, y);
  return -(d2 + d1 / y) - P::f_nonlin_d(P::chi(y)) * f / (y * y);
}

std::vector<double> log_sample(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i)
    v[i] = lo * std::exp(std::log(hi / lo) * i / (n - 1.0));
  return v;
}

}  // namespace

TEST_CASE("instanton and zero mode values", "[profiles]") {
  CHECK(P::chi(0.0) == 1.0);
  CHECK(P::chi(1.0) == 0.0);
  CHECK(P::chi(2.0) == Catch::Approx(-3.0 / 5.0).margin(1e-15));
  CHECK(P::zeta(0.0) == 0.0);
  CHECK(P::zeta(1.0) == 1.0);
  CHECK(P::xi10(1.0) == Catch::Approx(-0.25).margin(1e-15));
  CHECK(P::eta2(1.0) == Catch::Approx(0.0).margin(1e-15));  // 1/4+3/2-13/8-1/8
  CHECK(P::eval_profile(P::Kind::chi, 0.0) == 1.0);
  CHECK_THROWS_AS(P::eval_profile(P::Kind::chi, -0.5), std::domain_error);
}

TEST_CASE("range and shape invariants", "[profiles]") {
  for (double y : log_sample(1e-3, 1e3, 60)) {
    CHECK(P::chi(y) <= 1.0);
    CHECK(P::chi(y) > -1.0);
    if (y > 0.0) CHECK(P::zeta(y) > 0.0);
    CHECK(P::zeta(y) <= 1.0 + 1e-14);
  }
  // zeta peaks at y = 1 with value 1 and decays like 4/y^2
  CHECK(P::zeta(1.0) == 1.0);
  CHECK(P::zeta_d1(1.0) == Catch::Approx(0.0).margin(1e-15));
  const double y = 300.0;
  CHECK(P::zeta(y) * y * y / 4.0 == Catch::Approx(1.0).epsilon(5e-5));
}

TEST_CASE("closed-form derivatives match finite differences", "[profiles]") {
  using K = P::Kind;
  for (K k : {K::chi, K::zeta, K::xi10, K::eta1, K::eta2, K::w2}) {
    for (double y : log_sample(0.05, 50.0, 12)) {
      // step sized to the local feature scale; w2 gets a larger step so FD
      // truncation dominates its quadrature noise
      double h = 1e-3 * std::max(1.0, y);
      if (k == K::eta2) h = 1e-3 * y;
      if (k == K::w2) h = 2e-2 * std::max(1.0, y);
      auto d1err = [&](double hh) {
        const double fd =
            (P::eval_profile(k, y + hh) - P::eval_profile(k, y - hh)) / (2.0 * hh);
        return std::abs(fd - P::eval_deriv1(k, y));
      };
      auto d2err = [&](double hh) {
        const double fd = (P::eval_profile(k, y + hh) - 2.0 * P::eval_profile(k, y) +
                           P::eval_profile(k, y - hh)) /
                          (hh * hh);
        return std::abs(fd - P::eval_deriv2(k, y));
      };
      const double scale1 = std::abs(P::eval_deriv1(k, y)) + 1e-6;
      const double scale2 = std::abs(P::eval_deriv2(k, y)) + 1e-6;
      // second-order convergence: error drops by ~4 when h halves
      const double e1 = d1err(h), e1h = d1err(h / 2);
      const double e2 = d2err(h), e2h = d2err(h / 2);
      CHECK(e1h <= e1 / 3.0 + 1e-10 * scale1 + 1e-12);
      CHECK(e2h <= e2 / 3.0 + 1e-7 * scale2 + 1e-9);
      const double acc = (k == K::w2) ? 1e-3 : 1e-4;  // w2 runs a larger step
      CHECK(e1h <= acc * scale1 + 1e-12);
      CHECK(e2h <= 10.0 * acc * scale2 + 1e-9);
    }
  }
}

TEST_CASE("homogeneous and inhomogeneous identities of the linearization",
          "[profiles]") {
  for (double y : log_sample(0.02, 200.0, 40)) {
    CHECK(std::abs(L_of(P::Kind::zeta, y)) < 1e-11 * (1.0 + 1.0 / (y * y)));
    CHECK(std::abs(L_of(P::Kind::eta1, y)) < 1e-11 * (1.0 + 1.0 / (y * y)));
    CHECK(std::abs(L_of(P::Kind::eta2, y)) < 1e-9 * (1.0 + 1.0 / (y * y * y * y)));
    // L xi10 = B1 chi
    CHECK(L_of(P::Kind::xi10, y) ==
          Catch::Approx(P::B1_chi(y)).margin(1e-11 * (1.0 + 1.0 / (y * y))));
  }
  // L w2 = 2 gamma xi10 (closed-form derivatives carry the full chain)
  for (double y : log_sample(0.05, 50.0, 25)) {
    CHECK(L_of(P::Kind::w2, y) ==
          Catch::Approx(2.0 * P::kGamma * P::xi10(y)).margin(2e-9));
  }
}

TEST_CASE("scaling operators", "[profiles]") {
  struct Const {
    static double f(double) { return 3.7; }
    static double z(double) { return 0.0; }
  };
  P::ProfileFns constant{&Const::f, &Const::z, &Const::z};
  CHECK(P::apply_B1(constant, 0.3) == 0.0);
  CHECK(P::apply_B1(constant, 42.0) == 0.0);
  CHECK(P::apply_B2(constant, 7.0) == 0.0);

  for (double y : log_sample(1e-2, 1e2, 40)) {
    // B2 chi = -zeta
    CHECK(P::apply_B2(P::Kind::chi, y) ==
          Catch::Approx(-P::zeta(y)).margin(1e-14));
    // B1 chi = (1 + y d/dy) zeta
    CHECK(P::apply_B1(P::Kind::chi, y) ==
          Catch::Approx(P::zeta(y) + y * P::zeta_d1(y)).margin(1e-13));
    // closed rational forms agree with the operator route
    CHECK(P::apply_B1(P::Kind::zeta, y) ==
          Catch::Approx(P::B1_zeta(y)).margin(1e-13));
    CHECK(P::apply_B1(P::Kind::xi10, y) ==
          Catch::Approx(P::B1_xi10(y)).margin(1e-12));
  }
  // far-field form B1 chi = -4/y^2 + 24/y^4 + O(y^-6)
  const double y = 100.0;
  CHECK(std::abs(P::B1_chi(y) + 4.0 / (y * y)) < 3e-7);
  CHECK(std::abs(P::B1_chi(y) + 4.0 / (y * y) - 24.0 / (y * y * y * y)) < 1e-9);
}

TEST_CASE("nonlinearity and its expansion defect", "[profiles]") {
  CHECK(P::f_nonlin(1.0) == 0.0);
  CHECK(P::f_nonlin(0.0) == 0.0);
  CHECK(P::f_nonlin(-1.0) == 0.0);
  CHECK(P::f_nonlin(0.5) == Catch::Approx(0.75).margin(1e-16));
  CHECK(P::N_closed(1.0, 1.0) == -8.0);
  CHECK(P::N_defect(1.0, 1.0) == Catch::Approx(-8.0).margin(1e-13));

  std::mt19937 rng(20240817);
  std::uniform_real_distribution<double> uy(0.0, 5.0), uw(-2.0, 2.0);
  for (int i = 0; i < 500; ++i) {
    const double c = P::chi(uy(rng));
    const double w = uw(rng);
    CHECK(P::N_defect(c, w) == Catch::Approx(P::N_closed(c, w)).margin(1e-12));
  }
}

TEST_CASE("w2 pieces and asymptotics", "[profiles]") {
  // c2 vanishes at the origin side and increases monotonically
  CHECK(std::abs(P::w2_c2(1e-4)) < 1e-14);
  double prev = 0.0;
  for (double y : log_sample(1e-2, 30.0, 20)) {
    const double c2 = P::w2_c2(y);
    CHECK(c2 >= prev - 1e-15);
    prev = c2;
  }
  // c2 grows like gamma * ln(y^2) at large y
  {
    const double y1 = 50.0, y2 = 400.0;
    const double slope = (P::w2_c2(y2) - P::w2_c2(y1)) /
                         (std::log(y2 * y2) - std::log(y1 * y1));
    CHECK(slope == Catch::Approx(P::kGamma).epsilon(1e-3));
  }
  // derivative identities of the coefficient functions
  for (double y : {0.5, 2.0, 10.0}) {
    const double h = 1e-5 * y;
    CHECK((P::w2_c1(y + h) - P::w2_c1(y - h)) / (2 * h) ==
          Catch::Approx(P::w2_c1_d1(y)).epsilon(1e-7));
    CHECK((P::w2_c2(y + h) - P::w2_c2(y - h)) / (2 * h) ==
          Catch::Approx(P::w2_c2_d1(y)).epsilon(1e-7));
  }
  // large-y form (gamma/4) y^2 (ln y^2 - 7/3): the -7/3 offset is what the
  // inner expansion of the interior-layer equation carries
  {
    const double y = 30.0;
    const double ref =
        P::kGamma / 4.0 * y * y * (std::log(y * y) - 7.0 / 3.0);
    CHECK(std::abs(P::w2(y) - ref) <= 0.10 * std::abs(ref));
    // and the bare leading term is approached from below as y grows
    auto bare_ratio = [](double yy) {
      return P::w2(yy) / (P::kGamma / 4.0 * yy * yy * std::log(yy * yy));
    };
    CHECK(std::abs(bare_ratio(300.0) - 1.0) < std::abs(bare_ratio(30.0) - 1.0));
  }
  // series patch at the origin agrees with the assembled form: evaluate the
  // full formula just above the cutoff against the series at the same y
  CHECK(P::w2(1e-2) == Catch::Approx(-0.75 * 1e-4 * (1.0 - 2e-4)).epsilon(1e-6));
  CHECK(P::w2(0.0) == 0.0);
  {
    const double y = 1.001e-3;
    CHECK(P::w2(y) ==
          Catch::Approx(-0.75 * y * y * (1.0 - 2.0 * y * y)).epsilon(1e-8));
  }
  CHECK_THROWS_AS(P::w2_c1(0.0), std::domain_error);
  CHECK_THROWS_AS(P::w2(-1.0), std::domain_error);
}
