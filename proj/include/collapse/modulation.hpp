#pragma once

// Dynamics of the dilation parameter: lambda lambda'' = gamma lambda'^4
// (optionally extended by a -kappa lambda'^6 term), its first integral
// lambda'^2 ln(1/(c lambda)) = 2/3, the collapse time as a quadrature, and
// the log-corrected asymptotic law near collapse.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "collapse/gauss_kronrod.hpp"

namespace collapse::mod {

inline constexpr double kGammaDefault = 0.75;

struct State {
  double t = 0.0;
  double lambda = 1.0;
  double lambda_dot = 0.0;
};

enum class StopReason { time_limit, lambda_floor, speed_blowup, step_underflow };

struct Trajectory {
  std::vector<State> samples;
  double c = 0.0;                 // first-integral constant from initial data
  StopReason stop = StopReason::time_limit;
  // filled when the run ends by collapse-side criteria
  std::optional<double> t_star_estimate;
  std::optional<std::pair<double, double>> t_star_bracket;
  bool collapsed() const { return stop == StopReason::lambda_floor; }
};

struct IntegrateOptions {
  double gamma = kGammaDefault;
  double extended_coeff = 0.0;    // coefficient of the lambda'^6 correction
  double lambda_min = 1e-6;
  double speed_cap = 1e6;         // |lambda'| limit (expanding branch)
  double step_safety = 1e-2;      // dt <= safety * lambda / |lambda'|
  int sample_stride = 1;
};

// c fixed by the initial data: ln(1/(c l0)) = (2/3) / l0'^2
inline double closed_form_c(double lambda0, double lambda_dot0) {
  if (!(lambda0 > 0.0)) throw std::domain_error("closed_form_c: lambda0 <= 0");
  if (lambda_dot0 == 0.0)
    throw std::domain_error("closed_form_c: undefined constant at lambda_dot0 = 0");
  return std::exp(-(2.0 / 3.0) / (lambda_dot0 * lambda_dot0)) / lambda0;
}

// the conserved combination lambda'^2 ln(1/(c lambda)); 2/3 on collapsing
// trajectories of the unextended equation
inline double first_integral(const State& s, double c) {
  const double cl = c * s.lambda;
  if (!(cl < 1.0) || !(cl > 0.0))
    throw std::domain_error("first_integral: requires 0 < c lambda < 1");
  return s.lambda_dot * s.lambda_dot * std::log(1.0 / cl);
}

namespace detail {

struct Deriv {
  double dl, dld;
};

inline Deriv rhs(double lambda, double lambda_dot, double gamma, double kappa) {
  const double ld2 = lambda_dot * lambda_dot;
  const double ld4 = ld2 * ld2;
  return {lambda_dot, (gamma * ld4 - kappa * ld4 * ld2) / lambda};
}

}  // namespace detail

// Classical RK4 with the step clamped to a fixed fraction of lambda/|lambda'|
// so the relative change of lambda per step stays bounded near collapse.
inline Trajectory integrate_modulation(double lambda0, double lambda_dot0,
                                       double dt, double t_end,
                                       const IntegrateOptions& opt = {}) {
  if (!(lambda0 > 0.0) || !(dt > 0.0))
    throw std::invalid_argument("integrate_modulation: need lambda0 > 0, dt > 0");
  Trajectory traj;
  if (lambda_dot0 != 0.0) traj.c = closed_form_c(lambda0, lambda_dot0);

  State s{0.0, lambda0, lambda_dot0};
  traj.samples.push_back(s);
  const double g = opt.gamma, k = opt.extended_coeff;
  long long accepted = 0;
  while (s.t < t_end) {
    traj.stop = StopReason::time_limit;
    if (s.lambda <= opt.lambda_min) {
      traj.stop = StopReason::lambda_floor;
      break;
    }
    if (std::abs(s.lambda_dot) >= opt.speed_cap) {
      traj.stop = StopReason::speed_blowup;
      break;
    }
    double h = dt;
    if (s.lambda_dot != 0.0)
      h = std::min(h, opt.step_safety * s.lambda / std::abs(s.lambda_dot));
    // expanding branch: also resolve the approach of c lambda to 1
    if (s.lambda_dot > 0.0 && traj.c > 0.0) {
      const double eps = 1.0 - traj.c * s.lambda;
      if (eps > 0.0)
        h = std::min(h, opt.step_safety * eps / (traj.c * s.lambda_dot));
    }
    h = std::min(h, t_end - s.t);

    // shrink until the step keeps lambda positive
    State next;
    for (;;) {
      const auto k1 = detail::rhs(s.lambda, s.lambda_dot, g, k);
      const auto k2 = detail::rhs(s.lambda + 0.5 * h * k1.dl,
                                  s.lambda_dot + 0.5 * h * k1.dld, g, k);
      const auto k3 = detail::rhs(s.lambda + 0.5 * h * k2.dl,
                                  s.lambda_dot + 0.5 * h * k2.dld, g, k);
      const auto k4 =
          detail::rhs(s.lambda + h * k3.dl, s.lambda_dot + h * k3.dld, g, k);
      next.t = s.t + h;
      next.lambda =
          s.lambda + h / 6.0 * (k1.dl + 2.0 * k2.dl + 2.0 * k3.dl + k4.dl);
      next.lambda_dot =
          s.lambda_dot + h / 6.0 * (k1.dld + 2.0 * k2.dld + 2.0 * k3.dld + k4.dld);
      if (next.lambda > 0.0) break;
      h *= 0.5;
      if (h < 1e-16 * std::max(1.0, s.t)) {
        traj.stop = StopReason::step_underflow;
        traj.t_star_bracket = {s.t, s.t + 2.0 * h};
        traj.samples.push_back(s);
        return traj;
      }
    }
    s = next;
    if (++accepted % opt.sample_stride == 0) traj.samples.push_back(s);

    if (s.lambda <= opt.lambda_min) {
      traj.stop = StopReason::lambda_floor;
      break;
    }
  }
  if (traj.samples.back().t != s.t) traj.samples.push_back(s);

  // collapse-side bookkeeping: remaining time from the final state via the
  // trajectory's own first integral
  if (traj.collapsed() && s.lambda_dot < 0.0) {
    const double c_now =
        std::exp(-(2.0 / 3.0) / (s.lambda_dot * s.lambda_dot)) / s.lambda;
    const double L = std::log(1.0 / (c_now * s.lambda));
    auto integrand = [c_now](double lam) {
      return std::sqrt(std::log(1.0 / (c_now * lam)));
    };
    const double tail =
        std::sqrt(1.5) * gk::integrate(integrand, 0.0, s.lambda, 1e-13).value;
    traj.t_star_estimate = s.t + tail;
    // lower bound: |lambda'| only decreases toward collapse
    traj.t_star_bracket = {s.t + s.lambda / std::abs(s.lambda_dot),
                           s.t + std::sqrt(1.5) * s.lambda * (std::sqrt(L) + 1.0)};
  }
  return traj;
}

struct CollapseTime {
  double t_star = 0.0;         // quadrature of the first-integral law
  double rough_estimate = 0.0; // lambda0 / |lambda_dot0|
};

// t* = sqrt(3/2) int_0^{lambda0} ln^{1/2}(1/(c lambda)) dlambda
inline CollapseTime collapse_time(double lambda0, double lambda_dot0,
                                  double tol = 1e-13) {
  if (!(lambda_dot0 < 0.0))
    throw std::domain_error("collapse_time: requires lambda_dot0 < 0");
  const double c = closed_form_c(lambda0, lambda_dot0);
  auto integrand = [c](double lam) {
    return std::sqrt(std::log(1.0 / (c * lam)));
  };
  CollapseTime out;
  out.t_star = std::sqrt(1.5) * gk::integrate(integrand, 0.0, lambda0, tol).value;
  out.rough_estimate = lambda0 / std::abs(lambda_dot0);
  return out;
}

// lambda ~ sqrt(2/3) (t*-t) / sqrt(-ln(t*-t)) near collapse. The gap form
// exists because t*-t underflows the difference of two O(1) times long
// before the law stops being interesting.
inline double asymptotic_lambda_gap(double t_star_minus_t) {
  if (!(t_star_minus_t > 0.0) || !(t_star_minus_t < 1.0))
    throw std::domain_error("asymptotic_lambda: requires 0 < t*-t < 1");
  return std::sqrt(2.0 / 3.0) * t_star_minus_t / std::sqrt(-std::log(t_star_minus_t));
}

inline double asymptotic_lambda(double t, double t_star) {
  return asymptotic_lambda_gap(t_star - t);
}

// I(L) = int_0^inf sqrt(v + L) e^-v dv, the tail factor in
// t* - t = sqrt(3/2) lambda I(ln(1/(c lambda))). Stable for large L.
inline double collapse_tail_factor(double L) {
  if (!(L >= 0.0)) throw std::domain_error("collapse_tail_factor: L < 0");
  auto f = [L](double v) { return std::sqrt(v + L) * std::exp(-v); };
  return gk::integrate(f, 0.0, 60.0, 1e-14).value;
}

// time to collapse of the exact trajectory at scale lambda
inline double time_to_collapse(double lambda, double c) {
  const double cl = c * lambda;
  if (!(cl > 0.0) || !(cl < 1.0))
    throw std::domain_error("time_to_collapse: requires 0 < c lambda < 1");
  return std::sqrt(1.5) * lambda * collapse_tail_factor(std::log(1.0 / cl));
}

// ---- expanding branch ------------------------------------------------------

struct CaseAFit {
  bool conclusive = false;
  double t_star = 0.0;
  double exponent = 0.0;   // of (t*-t) in 1 - c lambda
  double amplitude = 0.0;  // prefactor; (3 c^2 / 2)^{1/3} on the exact branch
  std::string note;
};

// Fits 1 - c lambda = A (t*-t)^p over the approach to c lambda = 1 of an
// expanding trajectory (lambda_dot0 > 0).
inline CaseAFit case_a_asymptotics(const Trajectory& traj) {
  CaseAFit fit;
  if (traj.samples.empty() || traj.samples.front().lambda_dot <= 0.0) {
    fit.note = "not an expanding trajectory";
    return fit;
  }
  const double c = traj.c;
  const State& last = traj.samples.back();
  if (1.0 - c * last.lambda > 1e-3) {
    fit.note = "trajectory never approached c lambda = 1";
    return fit;
  }
  // remaining time to the speed blowup from the first integral
  auto integrand = [c](double lam) {
    return std::sqrt(std::log(1.0 / (c * lam)));
  };
  const double t_star =
      last.t +
      std::sqrt(1.5) * gk::integrate(integrand, last.lambda, 1.0 / c, 1e-13).value;

  // window: 1e-4 <= 1 - c lambda <= 1e-2
  std::vector<double> lx, ly_;
  for (const State& s : traj.samples) {
    const double eps = 1.0 - c * s.lambda;
    if (eps < 1e-4 || eps > 1e-2) continue;
    if (!(t_star - s.t > 0.0)) continue;
    lx.push_back(std::log(t_star - s.t));
    ly_.push_back(std::log(eps));
  }
  if (lx.size() < 8) {
    fit.note = "too few samples in the fit window";
    return fit;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(lx.size());
  for (size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly_[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly_[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;
  fit.conclusive = true;
  fit.t_star = t_star;
  fit.exponent = slope;
  fit.amplitude = std::exp(intercept);
  return fit;
}

}  // namespace collapse::mod
