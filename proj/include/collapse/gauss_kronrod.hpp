#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

namespace collapse::gk {

// 7/15-point Gauss-Kronrod pair, nodes and weights for [-1,1].
inline constexpr double kXgk[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};
inline constexpr double kWgk[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};
inline constexpr double kWg[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct Result {
  double value = 0.0;
  double error = 0.0;  // absolute error estimate
};

namespace detail {

template <typename F>
Result kronrod_panel(F&& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double resg = 0.0, resk = 0.0;
  const double fc = f(c);
  resk = kWgk[7] * fc;
  resg = kWg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double x = half * kXgk[j];
    const double fsum = f(c - x) + f(c + x);
    resk += kWgk[j] * fsum;
    if (j % 2 == 1) resg += kWg[j / 2] * fsum;
  }
  Result r;
  r.value = resk * half;
  r.error = std::abs((resk - resg) * half);
  return r;
}

template <typename F>
void adapt(F&& f, double a, double b, double tol, double inv_total, int depth,
           Result& acc, std::size_t& panels, std::size_t max_panels) {
  Result r = kronrod_panel(f, a, b);
  // accept on a width-proportional share of the budget, on absolute
  // negligibility, or at the recursion floor (endpoint singularities);
  // the caller checks the accumulated estimate afterwards
  const double share = tol * std::max((b - a) * inv_total, 1e-12);
  if (r.error <= share || r.error <= 1e-3 * tol || depth >= 52) {
    acc.value += r.value;
    acc.error += r.error;
    return;
  }
  if (++panels > max_panels)
    throw std::runtime_error("adaptive quadrature exceeded panel budget");
  const double c = 0.5 * (a + b);
  adapt(f, a, c, tol, inv_total, depth + 1, acc, panels, max_panels);
  adapt(f, c, b, tol, inv_total, depth + 1, acc, panels, max_panels);
}

}  // namespace detail

// Adaptive integration of f over the finite interval [a,b] to absolute
// tolerance tol. Endpoints are never evaluated. Throws when the accumulated
// error estimate ends up far above the requested tolerance.
template <typename F>
Result integrate(F&& f, double a, double b, double tol = 1e-12) {
  Result acc;
  if (a == b) return acc;
  std::size_t panels = 0;
  detail::adapt(f, a, b, tol, 1.0 / std::abs(b - a), 0, acc, panels, 200000);
  if (acc.error > 50.0 * tol) {
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "adaptive quadrature on [%.6g, %.6g]: error estimate %.3e "
                  "exceeds tolerance %.3e",
                  a, b, acc.error, tol);
    throw std::runtime_error(msg);
  }
  return acc;
}

}  // namespace collapse::gk
