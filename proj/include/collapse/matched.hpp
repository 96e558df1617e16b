#pragma once

// Interior-layer correction factor phi1(z), z = lambda_dot^4 y^2, governed by
//   z^2 phi'' + (z + gamma z^2) phi' - (1 - gamma z/2) phi = -1,  phi(0) = 1.
// Integrated in s = ln z from an inner-expansion seed; the outer behaviour
// c/sqrt(z) + 2/(gamma z) + cbar exp(-gamma z)/sqrt(z) is fitted with the
// first subleading 1/z corrections of the two homogeneous modes included
// (they matter on any window reachable in double precision).

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "collapse/profiles.hpp"

namespace collapse::matched {

inline constexpr double kGamma = profiles::kGamma;

struct Phi1Solution {
  std::vector<double> z;     // log-spaced nodes
  std::vector<double> phi;
  std::vector<double> dphi_ds;  // d phi / d ln z at the nodes
  double lambda_dot = 0.0;
  double gamma = kGamma;
  double z_min = 0.0, z_max = 0.0;
};

// free constant of the general inner solution fixed by matching
inline double matching_constant(double lambda_dot) {
  if (!(lambda_dot > 0.0) || !(lambda_dot <= 1.0))
    throw std::domain_error("matching_constant: lambda_dot must lie in (0,1]");
  return -4.0 * std::log(lambda_dot);
}

// inner expansion phi = 1 - (gamma z/4)(ln(z/lambda_dot^4) - 7/3)
inline double inner_expansion(double z, double lambda_dot, double gamma = kGamma) {
  return 1.0 - 0.25 * gamma * z * (std::log(z) + matching_constant(lambda_dot) - 7.0 / 3.0);
}
inline double inner_expansion_dposlnz(double z, double lambda_dot,
                                      double gamma = kGamma) {
  // d/d(ln z) of the inner expansion
  return -0.25 * gamma * z *
         (std::log(z) + matching_constant(lambda_dot) - 7.0 / 3.0 + 1.0);
}

namespace detail {

struct Sys {
  double gamma;
  // state: (phi, psi = dphi/ds), s = ln z
  void operator()(double s, const double in[2], double out[2]) const {
    const double zz = std::exp(s);
    out[0] = in[1];
    out[1] = -gamma * zz * in[1] + (1.0 - 0.5 * gamma * zz) * in[0] - 1.0;
  }
};

inline void rk4_step(const Sys& f, double s, double h, double y[2]) {
  double k1[2], k2[2], k3[2], k4[2], t[2];
  f(s, y, k1);
  t[0] = y[0] + 0.5 * h * k1[0];
  t[1] = y[1] + 0.5 * h * k1[1];
  f(s + 0.5 * h, t, k2);
  t[0] = y[0] + 0.5 * h * k2[0];
  t[1] = y[1] + 0.5 * h * k2[1];
  f(s + 0.5 * h, t, k3);
  t[0] = y[0] + h * k3[0];
  t[1] = y[1] + h * k3[1];
  f(s + h, t, k4);
  y[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
  y[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
}

}  // namespace detail

// Integrates outward from z_min = 1e-6 with the inner expansion as seed.
// tol controls the output grid density (and thereby the step size).
inline Phi1Solution solve_phi1(double lambda_dot, double z_max,
                               double tol = 1e-8, double z_min = 1e-6,
                               double gamma = kGamma) {
  if (!(lambda_dot > 0.0) || !(lambda_dot < 1.0))
    throw std::domain_error("solve_phi1: lambda_dot must lie in (0,1)");
  if (!(z_max >= 10.0)) throw std::invalid_argument("solve_phi1: z_max < 10");

  Phi1Solution sol;
  sol.lambda_dot = lambda_dot;
  sol.gamma = gamma;
  sol.z_min = z_min;
  sol.z_max = z_max;

  const double s0 = std::log(z_min), s1 = std::log(z_max);
  // node spacing: fine enough that a 5-point stencil in ln z certifies the
  // ODE residual down to ~tol/10 even where gamma*z is large
  const double hs_target =
      std::pow(0.3 * tol / std::max(1.0, gamma * z_max), 0.25);
  const int per_decade = std::clamp(
      static_cast<int>(std::ceil(std::log(10.0) / hs_target)), 300, 4000);
  const int n = static_cast<int>(std::ceil((s1 - s0) / std::log(10.0) * per_decade));
  sol.z.resize(n + 1);
  sol.phi.resize(n + 1);
  sol.dphi_ds.resize(n + 1);
  const double hs = (s1 - s0) / n;

  detail::Sys f{gamma};
  double y[2] = {inner_expansion(z_min, lambda_dot, gamma),
                 inner_expansion_dposlnz(z_min, lambda_dot, gamma)};
  sol.z[0] = z_min;
  sol.phi[0] = y[0];
  sol.dphi_ds[0] = y[1];

  for (int i = 0; i < n; ++i) {
    const double sa = s0 + i * hs;
    const double za = std::exp(sa + hs);
    // stability of the decaying mode: substep when gamma*z*h gets large
    const int sub = std::max(1, static_cast<int>(std::ceil(gamma * za * hs / 0.5)));
    const double h = hs / sub;
    for (int k = 0; k < sub; ++k) detail::rk4_step(f, sa + k * h, h, y);
    if (!std::isfinite(y[0]) || std::abs(y[0]) > 1e8) {
      throw std::runtime_error(
          "solve_phi1: integration lost stability; largest valid z = " +
          std::to_string(std::exp(sa)));
    }
    sol.z[i + 1] = std::exp(sa + hs);
    sol.phi[i + 1] = y[0];
    sol.dphi_ds[i + 1] = y[1];
  }
  sol.z.back() = z_max;
  return sol;
}

// ODE residual at the grid nodes from 5-point finite differences in ln z of
// the sampled values alone (independent of the integrator's own derivatives).
inline std::vector<double> ode_residual(const Phi1Solution& sol) {
  const int n = static_cast<int>(sol.z.size());
  std::vector<double> res(n, 0.0);
  const double hs = std::log(sol.z[1] / sol.z[0]);
  auto phi = [&sol](int i) { return sol.phi[i]; };
  for (int i = 2; i + 2 < n; ++i) {
    const double d1 =
        (phi(i - 2) - 8.0 * phi(i - 1) + 8.0 * phi(i + 1) - phi(i + 2)) /
        (12.0 * hs);
    const double d2 = (-phi(i - 2) + 16.0 * phi(i - 1) - 30.0 * phi(i) +
                       16.0 * phi(i + 1) - phi(i + 2)) /
                      (12.0 * hs * hs);
    const double zz = sol.z[i];
    res[i] = d2 + sol.gamma * zz * d1 -
             (1.0 - 0.5 * sol.gamma * zz) * phi(i) + 1.0;
  }
  // edge nodes: copy nearest interior estimate
  if (n > 4) {
    res[0] = res[1] = res[2];
    res[n - 1] = res[n - 2] = res[n - 3];
  }
  return res;
}

struct OuterFit {
  double c = 0.0;
  double c_bar = 0.0;
  double fit_residual = 0.0;  // max |fit - phi| / max |phi| over the window
};

// Least squares for (c, cbar) on z in [z_lo, z_max] with the particular
// coefficient pinned to 2/gamma. Basis functions carry their first two
// subleading corrections:
//   power mode    z^-1/2 (1 + a1/z + a2/z^2),  a1 = -3/(4 gamma), a2 = 5 a1/(8 gamma)
//   decaying mode e^{-gamma z} z^-1/2 (1 + b1/z + b2/z^2), b1 = -a1, b2 = 5 b1/(8 gamma) * (-1)
inline OuterFit fit_outer(const Phi1Solution& sol, double z_lo = 5.0) {
  if (sol.z_max < 10.0)
    throw std::invalid_argument("fit_outer: solution must extend to z >= 10");
  const double g = sol.gamma;
  const double a1 = -3.0 / (4.0 * g), a2 = 5.0 * a1 / (8.0 * g);
  const double b1 = -a1, b2 = -5.0 * b1 / (8.0 * g);
  auto basis_p = [&](double z) {
    return (1.0 + a1 / z + a2 / (z * z)) / std::sqrt(z);
  };
  auto basis_e = [&](double z) {
    return std::exp(-g * z) * (1.0 + b1 / z + b2 / (z * z)) / std::sqrt(z);
  };

  double s11 = 0, s12 = 0, s22 = 0, r1 = 0, r2 = 0;
  int m = 0;
  for (size_t i = 0; i < sol.z.size(); ++i) {
    const double z = sol.z[i];
    if (z < z_lo) continue;
    const double bp = basis_p(z), be = basis_e(z);
    const double t = sol.phi[i] - 2.0 / (g * z);
    s11 += bp * bp;
    s12 += bp * be;
    s22 += be * be;
    r1 += bp * t;
    r2 += be * t;
    ++m;
  }
  if (m < 8) throw std::runtime_error("fit_outer: too few nodes beyond z_lo");
  const double det = s11 * s22 - s12 * s12;
  if (!(std::abs(det) > 1e-14 * s11 * s22))
    throw std::runtime_error(
        "fit_outer: ill-conditioned normal equations; increase z_max");
  OuterFit fit;
  fit.c = (r1 * s22 - r2 * s12) / det;
  fit.c_bar = (s11 * r2 - s12 * r1) / det;

  double scale = 0.0, worst = 0.0;
  for (size_t i = 0; i < sol.z.size(); ++i)
    if (sol.z[i] >= z_lo) scale = std::max(scale, std::abs(sol.phi[i]));
  for (size_t i = 0; i < sol.z.size(); ++i) {
    const double z = sol.z[i];
    if (z < z_lo) continue;
    const double model =
        fit.c * basis_p(z) + 2.0 / (g * z) + fit.c_bar * basis_e(z);
    worst = std::max(worst, std::abs(model - sol.phi[i]));
  }
  fit.fit_residual = worst / scale;
  return fit;
}

// phi1 evaluated off-grid (linear in ln z between nodes; outer ansatz beyond)
inline double eval_phi1(const Phi1Solution& sol, const OuterFit& fit, double z) {
  if (z <= sol.z.front()) return sol.phi.front();
  if (z > sol.z.back()) {
    const double g = sol.gamma;
    const double a1 = -3.0 / (4.0 * g), a2 = 5.0 * a1 / (8.0 * g);
    return fit.c * (1.0 + a1 / z + a2 / (z * z)) / std::sqrt(z) +
           2.0 / (g * z) +
           fit.c_bar * std::exp(-g * z) / std::sqrt(z);
  }
  const double hs = std::log(sol.z[1] / sol.z[0]);
  const double x = std::log(z / sol.z[0]) / hs;
  const size_t i = std::min(sol.z.size() - 2, static_cast<size_t>(x));
  const double frac = x - static_cast<double>(i);
  return sol.phi[i] * (1.0 - frac) + sol.phi[i + 1] * frac;
}

struct FarFieldReport {
  bool conclusive = false;
  double exponent = 0.0;
  std::string note;
};

// Decay of lambda_dot^2 xi10(y) phi1(lambda_dot^4 y^2) in the far region
// lambda_dot^2 y >> 1; the exponent should come out near -1.
inline FarFieldReport far_field_decay_check(double lambda_dot,
                                            const std::vector<double>& y_samples,
                                            const Phi1Solution& sol,
                                            const OuterFit& fit) {
  FarFieldReport rep;
  if (y_samples.size() < 3) {
    rep.note = "need at least 3 samples";
    return rep;
  }
  for (double y : y_samples) {
    if (lambda_dot * lambda_dot * y < 10.0) {
      rep.note = "samples outside the regime lambda_dot^2 y >> 1";
      return rep;
    }
  }
  std::vector<double> lx, ly;
  for (double y : y_samples) {
    const double z = std::pow(lambda_dot, 4) * y * y;
    const double v =
        lambda_dot * lambda_dot * profiles::xi10(y) * eval_phi1(sol, fit, z);
    if (v == 0.0) continue;
    lx.push_back(std::log(y));
    ly.push_back(std::log(std::abs(v)));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(lx.size());
  for (size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  rep.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  rep.conclusive = true;
  return rep;
}

}  // namespace collapse::matched
