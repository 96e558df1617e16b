#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "collapse/modulation.hpp"

using namespace collapse;
namespace M = collapse::mod;

namespace {

// closed-form collapse time for (lambda0, lambda_dot0) = (1, -1):
// sqrt(3/2) e^{2/3} Gamma(3/2, 2/3) with the incomplete gamma reduced to erfc
double t_star_oracle_1_m1() {
  const double x = 2.0 / 3.0;
  const double inc = std::sqrt(x) * std::exp(-x) +
                     0.5 * std::sqrt(M_PI) * std::erfc(std::sqrt(x));
  return std::sqrt(1.5) * std::exp(x) * inc;
}

}  // namespace

TEST_CASE("fixed point and constants", "[modulation]") {
  auto traj = M::integrate_modulation(1.0, 0.0, 1e-2, 3.0);
  for (const auto& s : traj.samples) CHECK(s.lambda == 1.0);

  CHECK(M::closed_form_c(1.0, -1.0) ==
        Catch::Approx(std::exp(-2.0 / 3.0)).epsilon(1e-15));
  CHECK(M::closed_form_c(1.0, -1.0) == Catch::Approx(0.513417).epsilon(1e-6));
  CHECK_THROWS_AS(M::closed_form_c(1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(M::closed_form_c(-1.0, -1.0), std::domain_error);

  // scaling: c(lambda0/mu, ld0) = mu c(lambda0, ld0)
  for (double mu : {2.0, 5.0}) {
    CHECK(M::closed_form_c(1.0 / mu, -0.7) ==
          Catch::Approx(mu * M::closed_form_c(1.0, -0.7)).epsilon(1e-14));
  }
  // c lambda0 < 1 for any valid input
  for (double ld : {-0.2, -1.0, -3.0, 0.5}) {
    CHECK(M::closed_form_c(1.0, ld) * 1.0 < 1.0);
  }
}

TEST_CASE("first integral", "[modulation]") {
  const double c = M::closed_form_c(1.0, -1.0);
  M::State s0{0.0, 1.0, -1.0};
  CHECK(M::first_integral(s0, c) == Catch::Approx(2.0 / 3.0).epsilon(1e-15));
  M::State rest{0.0, 1.0, 0.0};
  CHECK(M::first_integral(rest, c) == 0.0);
  CHECK_THROWS_AS(M::first_integral(M::State{0.0, 3.0, -1.0}, c),
                  std::domain_error);
}

TEST_CASE("conservation along the collapsing branch", "[modulation]") {
  M::IntegrateOptions opt;
  opt.lambda_min = 1e-3;
  auto traj = M::integrate_modulation(1.0, -1.0, 1e-3, 1e3, opt);
  REQUIRE(traj.collapsed());
  double worst = 0.0;
  double prev_speed = 1.0 + 1e-12;
  for (const auto& s : traj.samples) {
    worst = std::max(worst,
                     std::abs(M::first_integral(s, traj.c) - 2.0 / 3.0));
    CHECK(s.lambda_dot < 0.0);
    CHECK(std::abs(s.lambda_dot) <= prev_speed + 1e-14);
    prev_speed = std::abs(s.lambda_dot);
  }
  CHECK(worst < 1e-8);

  // |lambda_dot| ~ [ln(1/(c lambda))]^{-1/2}: fitted exponent within 2%
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& s : traj.samples) {
    const double L = std::log(1.0 / (traj.c * s.lambda));
    sx += std::log(L);
    sy += std::log(-s.lambda_dot);
    sxx += std::log(L) * std::log(L);
    sxy += std::log(L) * std::log(-s.lambda_dot);
    ++n;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope == Catch::Approx(-0.5).epsilon(0.02));
}

TEST_CASE("integrator order (step-halving on the drift)", "[modulation]") {
  M::IntegrateOptions loose;
  loose.step_safety = 1e9;  // pure fixed-step runs for the ratio test
  auto drift = [&](double dt) {
    auto traj = M::integrate_modulation(1.0, -1.0, dt, 0.8, loose);
    double w = 0.0;
    for (const auto& s : traj.samples)
      w = std::max(w, std::abs(M::first_integral(s, traj.c) - 2.0 / 3.0));
    return w;
  };
  // steps chosen above the roundoff floor of the conserved combination
  const double d1 = drift(4e-3), d2 = drift(2e-3);
  CHECK(d1 / d2 == Catch::Approx(16.0).margin(5.0));
}

TEST_CASE("collapse time", "[modulation]") {
  auto ct = M::collapse_time(1.0, -1.0);
  CHECK(ct.t_star == Catch::Approx(t_star_oracle_1_m1()).margin(1e-8));
  CHECK(ct.t_star == Catch::Approx(1.5247408647766890).margin(1e-8));
  CHECK(ct.rough_estimate == 1.0);
  CHECK_THROWS_AS(M::collapse_time(1.0, 0.5), std::domain_error);

  // scaling: (lambda0/mu, ld0) -> t*/mu
  for (double mu : {2.0, 7.0}) {
    CHECK(M::collapse_time(1.0 / mu, -1.0).t_star ==
          Catch::Approx(ct.t_star / mu).epsilon(1e-10));
  }

  // integrator bracket against the quadrature
  M::IntegrateOptions opt;
  opt.lambda_min = 1e-6;
  auto traj = M::integrate_modulation(1.0, -1.0, 1e-3, 1e3, opt);
  REQUIRE(traj.collapsed());
  REQUIRE(traj.t_star_estimate.has_value());
  CHECK(std::abs(*traj.t_star_estimate - ct.t_star) / ct.t_star < 1e-4);
  REQUIRE(traj.t_star_bracket.has_value());
  CHECK(traj.t_star_bracket->first <= ct.t_star);
  CHECK(traj.t_star_bracket->second >= ct.t_star);
}

TEST_CASE("asymptotic law", "[modulation]") {
  const double ts = 10.0;
  CHECK(M::asymptotic_lambda(ts - std::exp(-1.0), ts) ==
        Catch::Approx(std::sqrt(2.0 / 3.0) / std::exp(1.0)).epsilon(1e-14));
  CHECK_THROWS_AS(M::asymptotic_lambda(ts, ts), std::domain_error);
  CHECK_THROWS_AS(M::asymptotic_lambda(ts - 1.0, ts), std::domain_error);
  CHECK_THROWS_AS(M::asymptotic_lambda(ts + 0.1, ts), std::domain_error);

  // the exact trajectory approaches the law from below
  const double c = M::closed_form_c(1.0, -1.0);
  const double ts_exact = M::collapse_time(1.0, -1.0).t_star;
  auto ratio_at = [&](double lambda) {
    const double dt = M::time_to_collapse(lambda, c);
    return lambda / M::asymptotic_lambda(ts_exact - dt, ts_exact);
  };
  const double r1 = ratio_at(1e-2), r2 = ratio_at(1e-4), r3 = ratio_at(1e-8);
  CHECK(r1 < 1.0);
  CHECK(r2 < 1.0);
  CHECK(r3 < 1.0);
  CHECK(r2 > r1);
  CHECK(r3 > r2);
}

TEST_CASE("expanding branch", "[modulation]") {
  M::IntegrateOptions opt;
  opt.speed_cap = 1e5;
  auto traj = M::integrate_modulation(1.0, 0.5, 1e-3, 1e3, opt);
  CHECK(traj.stop == M::StopReason::speed_blowup);
  // lambda_dot increases and c lambda -> 1
  CHECK(traj.samples.back().lambda_dot > traj.samples.front().lambda_dot);
  CHECK(traj.c * traj.samples.back().lambda > 0.999);

  auto fit = M::case_a_asymptotics(traj);
  REQUIRE(fit.conclusive);
  CHECK(fit.exponent == Catch::Approx(2.0 / 3.0).epsilon(0.05));
  const double amp_expect = std::cbrt(1.5 * traj.c * traj.c);
  CHECK(fit.amplitude == Catch::Approx(amp_expect).epsilon(0.10));

  // collapsing input is flagged inconclusive
  auto trajb = M::integrate_modulation(1.0, -1.0, 1e-3, 2.0);
  auto fitb = M::case_a_asymptotics(trajb);
  CHECK_FALSE(fitb.conclusive);
}

TEST_CASE("scaling covariance of the flow", "[modulation]") {
  M::IntegrateOptions opt;
  opt.step_safety = 1e9;
  auto a = M::integrate_modulation(1.0, -1.0, 1e-3, 0.9, opt);
  auto b = M::integrate_modulation(0.5, -1.0, 5e-4, 0.45, opt);
  // lambda_b(t) = 0.5 lambda_a(2t); with these steps index m of the halved
  // run sits at half the time of index m of the base run
  const size_t nm = std::min(a.samples.size(), b.samples.size());
  REQUIRE(nm > 100);
  for (size_t m = 0; m + 1 < nm; m += 7) {
    const auto& sa = a.samples[m];
    const auto& sb = b.samples[m];
    REQUIRE(sa.t == Catch::Approx(2.0 * sb.t).margin(1e-12));
    CHECK(sb.lambda == Catch::Approx(0.5 * sa.lambda).epsilon(1e-10));
    CHECK(sb.lambda_dot == Catch::Approx(sa.lambda_dot).epsilon(1e-10));
  }
}

TEST_CASE("extended equation accepts a sixth-order coefficient", "[modulation]") {
  M::IntegrateOptions opt;
  opt.extended_coeff = 0.1;
  opt.lambda_min = 1e-2;
  auto traj = M::integrate_modulation(1.0, -1.0, 1e-3, 1e3, opt);
  CHECK(traj.collapsed());
  // the correction measurably changes the approach to collapse
  auto base = M::integrate_modulation(1.0, -1.0, 1e-3, 1e3,
                                      [] {
                                        M::IntegrateOptions o;
                                        o.lambda_min = 1e-2;
                                        return o;
                                      }());
  CHECK(base.collapsed());
  CHECK(std::abs(traj.samples.back().t - base.samples.back().t) > 1e-4);
}
