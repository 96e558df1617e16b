#pragma once

// Direct solver for the radial semilinear wave equation
//   u_tt = u_rr + u_r / r + f(u) / r^2,   f(u) = 2u(1 - u^2),
// on nested cell-centered grids refined toward the origin, with leapfrog
// (velocity-Verlet) time stepping, an outgoing-wave outer boundary, energy
// diagnostics, and two independent extractors for the instanton scale.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "collapse/profiles.hpp"

namespace collapse::wave {

struct SimConfig {
  double lambda0 = 1.0;
  double lambda_dot0 = 0.0;
  double domain_radius = 32.0;
  double base_h = 1.0 / 32.0;
  double cfl = 0.4;
  int points_per_lambda = 32;   // refinement trigger
  double lambda_min = 1e-3;     // stop condition
  double t_max = 1e30;          // stop condition
  int max_levels = 16;
  int steps_per_sample = 16;
  // Orthogonality-extraction truncation, in units of the current scale.
  // Kept at the core radius: the first-order deviation profile decays so
  // slowly that the projection integral picks up an O(lambda_dot^2 ln y_cut)
  // bias as the cut grows.
  double y_cut = 1.0;
  // optional multiplicative bump on u: (1 + amp exp(-(r-r0)^2/width^2))
  double perturb_amp = 0.0;
  double perturb_r0 = -1.0;     // default 2 lambda0
  double perturb_width = -1.0;  // default lambda0
  bool use_curvature = true;
  bool use_orthogonality = true;
  bool strict_domain_check = true;

  void validate() const {
    if (!(lambda0 > 0.0)) throw std::invalid_argument("config: lambda0 <= 0");
    if (!(base_h > 0.0) || !(domain_radius > 4.0 * base_h))
      throw std::invalid_argument("config: bad grid extents");
    if (!(cfl > 0.0) || cfl > 0.9)
      throw std::invalid_argument("config: CFL fraction must lie in (0, 0.9]");
    if (points_per_lambda < 16)
      throw std::invalid_argument("config: refinement trigger below 16 points per lambda");
    if (!(lambda_min > 0.0)) throw std::invalid_argument("config: lambda_min <= 0");
    if (max_levels < 1) throw std::invalid_argument("config: max_levels < 1");
    if (strict_domain_check && domain_radius < 20.0 * lambda0)
      throw std::invalid_argument(
          "config: domain radius below 20*lambda0; outgoing waves would "
          "contaminate the core during collapse");
  }
};

// one uniform cell-centered grid: cells r_i = (i + 1/2) h, i = 0..n-1
struct Level {
  double h = 0.0;
  std::vector<double> u, v, acc;
  int n() const { return static_cast<int>(u.size()); }
  double r(int i) const { return (i + 0.5) * h; }
  double edge() const { return u.size() * h; }
};

struct WaveState {
  std::vector<Level> levels;  // [0] is the coarsest, covering [0, R]
  double t = 0.0;
  std::vector<double> boundary_ref;  // frozen outer reference profile (2 cells)
  double h_finest() const { return levels.back().h; }
  int n_levels() const { return static_cast<int>(levels.size()); }
};

class ExtractionFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class Instability : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- initial data ----------------------------------------------------------

inline WaveState init_state(const SimConfig& cfg) {
  cfg.validate();
  WaveState st;
  Level l0;
  l0.h = cfg.base_h;
  int n = static_cast<int>(std::floor(cfg.domain_radius / cfg.base_h + 0.5));
  n -= n % 4;  // keep counts refinement-friendly
  if (n < 16) throw std::invalid_argument("init_state: too few cells");
  l0.u.resize(n);
  l0.v.resize(n);
  l0.acc.assign(n, 0.0);
  const double r0 = cfg.perturb_r0 > 0.0 ? cfg.perturb_r0 : 2.0 * cfg.lambda0;
  const double pw = cfg.perturb_width > 0.0 ? cfg.perturb_width : cfg.lambda0;
  for (int i = 0; i < n; ++i) {
    const double r = l0.r(i);
    const double y = r / cfg.lambda0;
    double bump = 1.0;
    if (cfg.perturb_amp != 0.0) {
      const double arg = (r - r0) / pw;
      bump += cfg.perturb_amp * std::exp(-arg * arg);
    }
    l0.u[i] = profiles::chi(y) * bump;
    l0.v[i] = -(cfg.lambda_dot0 / cfg.lambda0) * y * profiles::chi_d1(y);
  }
  st.levels.push_back(std::move(l0));
  st.boundary_ref = {st.levels[0].u[n - 2], st.levels[0].u[n - 1]};
  return st;
}

// ---- spatial pieces --------------------------------------------------------

namespace detail {

// cubic Lagrange through 4 equally spaced samples, x in cell units measured
// from the first stencil sample
inline double cubic4(double f0, double f1, double f2, double f3, double x) {
  const double c0 = -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0;
  const double c1 = x * (x - 2.0) * (x - 3.0) / 2.0;
  const double c2 = -x * (x - 1.0) * (x - 3.0) / 2.0;
  const double c3 = x * (x - 1.0) * (x - 2.0) / 6.0;
  return c0 * f0 + c1 * f1 + c2 * f2 + c3 * f3;
}

// sample level data at radius r (cubic, with even reflection at the origin)
inline double sample_level(const std::vector<double>& q, double h, double r) {
  const int n = static_cast<int>(q.size());
  auto at = [&q](int i) { return q[i < 0 ? -1 - i : i]; };  // even ghost
  double x = r / h - 0.5;  // fractional cell index
  int i0 = static_cast<int>(std::floor(x)) - 1;
  if (i0 > n - 4) i0 = n - 4;
  if (i0 < -2) i0 = -2;
  return cubic4(at(i0), at(i0 + 1), at(i0 + 2), at(i0 + 3), x - i0);
}

// quartic Lagrange on a 5-point stencil centered at cell c of the parent,
// with even reflection below the origin
inline double quartic5(const std::vector<double>& q, int c, double x) {
  // x: offset from cell c in parent-cell units
  const int n = static_cast<int>(q.size());
  auto at = [&q, n](int i) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = n - 1;  // clamped; callers stay well inside
    return q[i];
  };
  double acc = 0.0;
  for (int j = -2; j <= 2; ++j) {
    double w = 1.0;
    for (int k = -2; k <= 2; ++k) {
      if (k == j) continue;
      w *= (x - k) / static_cast<double>(j - k);
    }
    acc += w * at(c + j);
  }
  return acc;
}

}  // namespace detail

// acceleration on one level; ghost0/ghost1 are the two cells beyond the edge
// (ignored for the coarsest level, whose last cell is boundary-driven)
inline void compute_acceleration(Level& lv, bool is_coarsest, double ghost0,
                                 double ghost1) {
  const int n = lv.n();
  const double h = lv.h;
  const double inv_h2 = 1.0 / (h * h);
  auto uat = [&](int i) -> double {
    if (i < n) return lv.u[i];
    return i == n ? ghost0 : ghost1;
  };
  const int top = is_coarsest ? n - 1 : n;
  for (int i = 0; i < top && i < n; ++i) {
    const double r = lv.r(i);
    const double fi = i * h;        // inner face radius (0 at the origin)
    const double fo = (i + 1) * h;  // outer face radius
    double lap;
    if (i == 0) {
      lap = (fo * (uat(1) - lv.u[0])) * inv_h2 / r;
    } else {
      lap = (fo * (uat(i + 1) - lv.u[i]) - fi * (lv.u[i] - lv.u[i - 1])) *
            inv_h2 / r;
    }
    lv.acc[i] = lap + profiles::f_nonlin(lv.u[i]) / (r * r);
  }
}

// ---- time stepping ---------------------------------------------------------

// One leapfrog (kick-drift-kick) step of size dt across all levels. The
// levels advance synchronously; child ghosts come from the parent, covered
// parent cells are replaced by restricted child averages afterwards.
inline void step(WaveState& st, double dt) {
  const double hf = st.h_finest();
  if (!(dt > 0.0) || dt > 0.9 * hf)
    throw std::invalid_argument("step: dt must satisfy dt <= 0.9 h_finest");
  const int L = st.n_levels();

  auto ghosts = [&st](int l, double& g0, double& g1) {
    const Level& child = st.levels[l];
    const Level& par = st.levels[l - 1];
    const int n = child.n();
    g0 = detail::sample_level(par.u, par.h, (n + 0.5) * child.h);
    g1 = detail::sample_level(par.u, par.h, (n + 1.5) * child.h);
  };

  // ensure accelerations correspond to the current u (lazy first call)
  for (int l = 0; l < L; ++l) {
    double g0 = 0.0, g1 = 0.0;
    if (l > 0) ghosts(l, g0, g1);
    compute_acceleration(st.levels[l], l == 0, g0, g1);
  }

  // kick + drift
  for (int l = 0; l < L; ++l) {
    Level& lv = st.levels[l];
    const int n = lv.n();
    const int top = (l == 0) ? n - 1 : n;
    for (int i = 0; i < top; ++i) lv.v[i] += 0.5 * dt * lv.acc[i];
    for (int i = 0; i < top; ++i) lv.u[i] += dt * lv.v[i];
  }
  // outgoing-wave closure for the outermost cell of the coarsest level:
  // d_t w = -d_r w - w/(2r) on w = u - u_ref
  {
    Level& lv = st.levels[0];
    const int n = lv.n();
    const double w1 = lv.u[n - 1] - st.boundary_ref[1];
    const double w0 = lv.u[n - 2] - st.boundary_ref[0];
    lv.v[n - 1] = -(w1 - w0) / lv.h - w1 / (2.0 * lv.r(n - 1));
    lv.u[n - 1] += dt * lv.v[n - 1];
  }

  // restrict drifted u (children win on covered cells)
  for (int l = L - 1; l > 0; --l) {
    const Level& child = st.levels[l];
    Level& par = st.levels[l - 1];
    const int nc = child.n();
    for (int k = 0; k + 2 < nc / 2; ++k)
      par.u[k] = 0.5 * (child.u[2 * k] + child.u[2 * k + 1]);
  }

  // closing kick with fresh accelerations
  for (int l = 0; l < L; ++l) {
    double g0 = 0.0, g1 = 0.0;
    if (l > 0) ghosts(l, g0, g1);
    compute_acceleration(st.levels[l], l == 0, g0, g1);
  }
  for (int l = 0; l < L; ++l) {
    Level& lv = st.levels[l];
    const int n = lv.n();
    const int top = (l == 0) ? n - 1 : n;
    for (int i = 0; i < top; ++i) lv.v[i] += 0.5 * dt * lv.acc[i];
  }
  // restrict v
  for (int l = L - 1; l > 0; --l) {
    const Level& child = st.levels[l];
    Level& par = st.levels[l - 1];
    const int nc = child.n();
    for (int k = 0; k + 2 < nc / 2; ++k)
      par.v[k] = 0.5 * (child.v[2 * k] + child.v[2 * k + 1]);
  }
  st.t += dt;
}

// scan for numerical breakdown; throws Instability naming the location
inline void check_finite(const WaveState& st) {
  for (int l = 0; l < st.n_levels(); ++l) {
    const Level& lv = st.levels[l];
    for (int i = 0; i < lv.n(); ++i) {
      if (!std::isfinite(lv.u[i]) || !std::isfinite(lv.v[i]) ||
          std::abs(lv.u[i]) > 3.0) {
        throw Instability("field blow-up or instability at t=" +
                          std::to_string(st.t) + ", level " + std::to_string(l) +
                          ", r=" + std::to_string(lv.r(i)));
      }
    }
  }
}

// ---- diagnostics -----------------------------------------------------------

// discrete energy: midpoint rule of (v^2 + u_r^2 + (1-u^2)^2/r^2) r dr per
// level over the region it owns. Gradients are fourth order and each piece
// carries Euler-Maclaurin end corrections, so the diagnostic changes only at
// O(h^4) when a refinement level is inserted.
inline double energy(const WaveState& st) {
  double E = 0.0;
  const int L = st.n_levels();
  for (int l = 0; l < L; ++l) {
    const Level& lv = st.levels[l];
    const int n = lv.n();
    const double h = lv.h;
    const double inner_edge = (l + 1 < L) ? st.levels[l + 1].edge() : 0.0;
    const int i_lo = static_cast<int>(std::floor(inner_edge / h + 0.5));

    auto uat = [&lv](int i) { return lv.u[i < 0 ? -1 - i : i]; };
    auto du_at = [&](int i) {
      if (i + 2 < n)
        return (8.0 * (uat(i + 1) - uat(i - 1)) - (uat(i + 2) - uat(i - 2))) /
               (12.0 * h);
      if (i + 1 < n) return (lv.u[i + 1] - uat(i - 1)) / (2.0 * h);
      return (lv.u[i] - lv.u[i - 1]) / h;
    };
    auto f_at = [&](int i) {
      const double r = lv.r(i);
      const double du = du_at(i);
      const double one_m_u2 = (1.0 - lv.u[i]) * (1.0 + lv.u[i]);
      return (lv.v[i] * lv.v[i] + du * du + one_m_u2 * one_m_u2 / (r * r)) * r;
    };

    double sum = 0.0;
    for (int i = i_lo; i < n; ++i) sum += f_at(i);
    E += sum * h;

    // end corrections (h^2/24)(f'(a) - f'(b))
    double dfa;
    if (i_lo == 0) {
      // f = g(r) r with g even: f'(0) = g(0), extrapolated in r^2
      const double g0 = f_at(0) / lv.r(0), g1 = f_at(1) / lv.r(1);
      dfa = (9.0 * g0 - g1) / 8.0;
    } else {
      dfa = (f_at(i_lo) - f_at(i_lo - 1)) / h;  // centered at the face
    }
    const double dfb =
        (3.0 * f_at(n - 1) - 4.0 * f_at(n - 2) + f_at(n - 3)) / (2.0 * h);
    E += h * h / 24.0 * (dfa - dfb);
  }
  return E;
}

// scale from the origin curvature: u ~ 1 - 2 (r/lambda)^2 + ...
// Even polynomial fit through the innermost cells; carried to cubic order in
// r^2 so the profile's own r^6 content does not bias the curvature.
inline double extract_lambda_curvature(const WaveState& st) {
  constexpr int kDim = 4;
  const Level& lv = st.levels.back();
  const int m = std::min(10, lv.n());
  if (std::abs(lv.u[0] - 1.0) > 0.5)
    throw ExtractionFailure("curvature extraction: field not near 1 at origin");
  const double rm = lv.r(m - 1);
  double S[kDim][kDim] = {};
  double b[kDim] = {};
  for (int i = 0; i < m; ++i) {
    const double x = (lv.r(i) / rm) * (lv.r(i) / rm);
    double phi[kDim];
    phi[0] = 1.0;
    for (int a = 1; a < kDim; ++a) phi[a] = phi[a - 1] * x;
    for (int a = 0; a < kDim; ++a) {
      for (int c = 0; c < kDim; ++c) S[a][c] += phi[a] * phi[c];
      b[a] += phi[a] * lv.u[i];
    }
  }
  // Gaussian elimination with partial pivoting
  int idx[kDim];
  for (int i = 0; i < kDim; ++i) idx[i] = i;
  for (int col = 0; col + 1 < kDim; ++col) {
    int piv = col;
    for (int row = col + 1; row < kDim; ++row)
      if (std::abs(S[idx[row]][col]) > std::abs(S[idx[piv]][col])) piv = row;
    std::swap(idx[col], idx[piv]);
    for (int row = col + 1; row < kDim; ++row) {
      const double f = S[idx[row]][col] / S[idx[col]][col];
      for (int c2 = col; c2 < kDim; ++c2) S[idx[row]][c2] -= f * S[idx[col]][c2];
      b[idx[row]] -= f * b[idx[col]];
    }
  }
  double sol[kDim];
  for (int row = kDim - 1; row >= 0; --row) {
    double acc = b[idx[row]];
    for (int c2 = row + 1; c2 < kDim; ++c2) acc -= S[idx[row]][c2] * sol[c2];
    sol[row] = acc / S[idx[row]][row];
  }
  const double u_rr0 = 2.0 * sol[1] / (rm * rm);  // u''(0) = 2B/rm^2
  if (!(u_rr0 < 0.0))
    throw ExtractionFailure(
        "curvature extraction: non-negative curvature at the origin");
  return 2.0 / std::sqrt(-u_rr0);
}

// field sample at radius r from the finest level that safely covers it
inline double sample_u(const WaveState& st, double r) {
  for (int l = st.n_levels() - 1; l > 0; --l) {
    const Level& lv = st.levels[l];
    if (r < lv.edge() - 2.5 * lv.h)
      return detail::sample_level(lv.u, lv.h, r);
  }
  const Level& lv = st.levels[0];
  return detail::sample_level(lv.u, lv.h, std::min(r, lv.edge() - 2.5 * lv.h));
}

// scale from the zero-mode orthogonality condition:
// G(lambda) = int zeta(y) [u(lambda y) - chi(y)] y dy = 0,
// truncated at y_cut scale units (see SimConfig::y_cut)
inline double extract_lambda_orthogonality(const WaveState& st,
                                           double lambda_guess,
                                           double y_cut = 1.0) {
  if (!(lambda_guess > 0.0))
    throw ExtractionFailure("orthogonality extraction: bad guess");
  const double R = st.levels[0].edge();
  auto G = [&](double lam) {
    const double y_hi = std::min({y_cut, (R - 6.0 * st.levels[0].h) / lam});
    const int N = 512;  // Simpson panels (even count of intervals)
    const double dy = y_hi / N;
    double s = 0.0;
    for (int k = 0; k <= N; ++k) {
      const double y = k * dy;
      const double w = (k == 0 || k == N) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      const double integrand =
          (y == 0.0) ? 0.0
                     : profiles::zeta(y) * (sample_u(st, lam * y) - profiles::chi(y)) * y;
      s += w * integrand;
    }
    return s * dy / 3.0;
  };
  double lo = lambda_guess / 1.9, hi = lambda_guess * 1.9;
  double Glo = G(lo), Ghi = G(hi);
  if (Glo * Ghi > 0.0) {
    lo = lambda_guess / 2.0;
    hi = lambda_guess * 2.0;
    Glo = G(lo);
    Ghi = G(hi);
    if (Glo * Ghi > 0.0)
      throw ExtractionFailure(
          "orthogonality extraction: no sign change within a factor 2 of the guess");
  }
  for (int it = 0; it < 60 && (hi - lo) > 1e-10 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double Gm = G(mid);
    if (Gm == 0.0) return mid;
    if (Gm * Glo < 0.0) {
      hi = mid;
      Ghi = Gm;
    } else {
      lo = mid;
      Glo = Gm;
    }
  }
  return 0.5 * (lo + hi);
}

// ---- refinement ------------------------------------------------------------

struct RefineEvent {
  double t = 0.0;
  double lambda = 0.0;
  int level = 0;
  double h_new = 0.0;
  double energy_rel_change = 0.0;
};

// adds one nested level (half spacing, half extent) when lambda is no longer
// resolved by points_per_lambda cells of the finest grid
inline std::optional<RefineEvent> refine_if_needed(WaveState& st,
                                                   double lambda_current,
                                                   const SimConfig& cfg) {
  const Level& fin = st.levels.back();
  if (lambda_current >= cfg.points_per_lambda * fin.h) return std::nullopt;
  if (st.n_levels() >= cfg.max_levels)
    throw std::runtime_error(
        "refinement: maximum level count reached at lambda = " +
        std::to_string(lambda_current));
  const double e_before = energy(st);
  Level child;
  child.h = fin.h / 2.0;
  const int nc = fin.n() - (fin.n() % 4);
  child.u.resize(nc);
  child.v.resize(nc);
  child.acc.assign(nc, 0.0);
  for (int j = 0; j < nc; ++j) {
    const double r = (j + 0.5) * child.h;
    const double x = r / fin.h - 0.5;  // parent fractional index
    const int c = static_cast<int>(std::floor(x + 0.5));
    child.u[j] = detail::quartic5(fin.u, c, x - c);
    child.v[j] = detail::quartic5(fin.v, c, x - c);
  }
  st.levels.push_back(std::move(child));
  const double e_after = energy(st);
  RefineEvent ev;
  ev.t = st.t;
  ev.lambda = lambda_current;
  ev.level = st.n_levels() - 1;
  ev.h_new = st.h_finest();
  ev.energy_rel_change = std::abs(e_after - e_before) / std::max(e_before, 1e-300);
  return ev;
}

// ---- full simulation -------------------------------------------------------

struct Sample {
  double t = 0.0;
  double lambda_curvature = 0.0;     // 0 when unavailable
  double lambda_orthogonality = 0.0; // 0 when unavailable
  double energy = 0.0;
};

struct SimResult {
  std::vector<Sample> samples;
  std::vector<RefineEvent> refinements;
  bool collapsed = false;
  std::string stop_reason;
  double t_star_estimate = 0.0;
  std::pair<double, double> t_star_bracket{0.0, 0.0};
  double law_slope = 0.0;            // d(lambda_dot^-2)/d ln lambda, final decade
  double law_slope_window_decades = 1.0;
  // fit of the sixth-order extension lambda lambda'' = (3/4) ld^4 - kappa ld^6
  // over the final two decades; the leading -3/2 slope is reached only when
  // 2 kappa lambda_dot^2 is negligible
  double law_kappa = 0.0;
  double law_extended_rms = 0.0;
  double law_linear_rms = 0.0;
  double energy_initial = 0.0;
  double energy_drift_rel = 0.0;     // max |E/E0 - 1| over the run
  double extractor_max_reldiff = 0.0;
  double max_abs_field = 0.0;        // overshoot monitor: stays near 1
};

namespace detail {

inline double lambda_of_sample(const Sample& s) {
  if (s.lambda_curvature > 0.0) return s.lambda_curvature;
  return s.lambda_orthogonality;
}

// least-squares slope/intercept of y against x
inline void line_fit(const std::vector<double>& x, const std::vector<double>& y,
                     double& slope, double& intercept) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  intercept = (sy - slope * sx) / n;
}

}  // namespace detail

inline SimResult run_simulation(const SimConfig& cfg) {
  SimResult res;
  WaveState st = init_state(cfg);

  auto take_sample = [&](double lambda_hint) -> Sample {
    Sample s;
    s.t = st.t;
    s.energy = energy(st);
    if (cfg.use_curvature) {
      try {
        s.lambda_curvature = extract_lambda_curvature(st);
      } catch (const ExtractionFailure&) {
        s.lambda_curvature = 0.0;
      }
    }
    if (cfg.use_orthogonality) {
      try {
        s.lambda_orthogonality =
            extract_lambda_orthogonality(st, lambda_hint, cfg.y_cut);
      } catch (const ExtractionFailure&) {
        s.lambda_orthogonality = 0.0;
      }
    }
    return s;
  };

  Sample s0 = take_sample(cfg.lambda0);
  res.energy_initial = s0.energy;
  res.samples.push_back(s0);

  double lambda_now = detail::lambda_of_sample(s0);
  if (lambda_now <= 0.0) lambda_now = cfg.lambda0;

  // initial refinement burst, if the starting scale is already marginal
  while (auto ev = refine_if_needed(st, lambda_now, cfg))
    res.refinements.push_back(*ev);

  const char* reason = nullptr;
  while (true) {
    if (st.t >= cfg.t_max) {
      reason = "time limit";
      break;
    }
    const double dt = cfg.cfl * st.h_finest();
    for (int k = 0; k < cfg.steps_per_sample && st.t < cfg.t_max; ++k)
      step(st, dt);
    check_finite(st);

    Sample s = take_sample(lambda_now);
    res.samples.push_back(s);
    const double lam = detail::lambda_of_sample(s);
    if (lam > 0.0) lambda_now = lam;

    if (s.lambda_curvature > 0.0 && s.lambda_orthogonality > 0.0 &&
        s.lambda_curvature >= 32.0 * st.h_finest()) {
      const double rd = std::abs(s.lambda_curvature - s.lambda_orthogonality) /
                        s.lambda_curvature;
      res.extractor_max_reldiff = std::max(res.extractor_max_reldiff, rd);
    }
    res.energy_drift_rel =
        std::max(res.energy_drift_rel,
                 std::abs(s.energy - res.energy_initial) /
                     std::max(std::abs(res.energy_initial), 1e-300));
    for (const Level& lv : st.levels)
      for (double uu : lv.u)
        res.max_abs_field = std::max(res.max_abs_field, std::abs(uu));

    if (lam > 0.0 && lam <= cfg.lambda_min) {
      reason = "lambda floor";
      res.collapsed = true;
      break;
    }
    if (lam <= 0.0 && st.t > 0.0 && res.samples.size() > 4) {
      reason = "extraction lost the scale";
      break;
    }
    try {
      while (auto ev = refine_if_needed(st, lambda_now, cfg))
        res.refinements.push_back(*ev);
    } catch (const std::runtime_error&) {
      reason = "maximum refinement depth";
      break;
    }
  }
  res.stop_reason = reason ? reason : "unknown";

  // collapse-time estimate: fit lambda_dot^-2 = A ln lambda + B over the
  // final decade of the series and integrate the implied law to lambda = 0
  std::vector<double> lx, ly;
  {
    std::vector<std::pair<double, double>> tl;  // (t, lambda)
    for (const Sample& s : res.samples) {
      const double lam = detail::lambda_of_sample(s);
      if (lam > 0.0) tl.emplace_back(s.t, lam);
    }
    if (tl.size() >= 8 && res.collapsed) {
      const double lam_end = tl.back().second;
      for (size_t i = 1; i + 1 < tl.size(); ++i) {
        const double lam = tl[i].second;
        if (lam > 10.0 * lam_end) continue;
        const double ld = (tl[i + 1].second - tl[i - 1].second) /
                          (tl[i + 1].first - tl[i - 1].first);
        if (ld >= 0.0) continue;
        lx.push_back(std::log(lam));
        ly.push_back(1.0 / (ld * ld));
      }
    }
    // extended-law fit over the final two decades: with p = lambda_dot^-2
    // and x = ln lambda, the corrected first integral reads
    // p = -3/2 x - (4 kappa/3) ln p + const
    if (res.collapsed) {
      std::vector<std::pair<double, double>> tl2;
      for (const Sample& s : res.samples) {
        const double lam = detail::lambda_of_sample(s);
        if (lam > 0.0) tl2.emplace_back(s.t, lam);
      }
      std::vector<double> u, v;  // (ln p, p + 1.5 x)
      const double lam_end2 = tl2.empty() ? 1.0 : tl2.back().second;
      for (size_t i = 1; i + 1 < tl2.size(); ++i) {
        const double lam = tl2[i].second;
        if (lam > 100.0 * lam_end2) continue;
        const double ld = (tl2[i + 1].second - tl2[i - 1].second) /
                          (tl2[i + 1].first - tl2[i - 1].first);
        if (ld >= 0.0) continue;
        const double p = 1.0 / (ld * ld);
        u.push_back(std::log(p));
        v.push_back(p + 1.5 * std::log(lam));
      }
      if (u.size() >= 8) {
        double coef = 0.0, c0 = 0.0;
        detail::line_fit(u, v, coef, c0);
        res.law_kappa = -0.75 * coef;
        double rms = 0.0;
        for (size_t i = 0; i < u.size(); ++i) {
          const double d = v[i] - (coef * u[i] + c0);
          rms += d * d;
        }
        res.law_extended_rms = std::sqrt(rms / u.size());
        // plain linear model over the same window, for comparison
        std::vector<double> px, py;
        for (size_t i = 1; i + 1 < tl2.size(); ++i) {
          const double lam = tl2[i].second;
          if (lam > 100.0 * lam_end2) continue;
          const double ld = (tl2[i + 1].second - tl2[i - 1].second) /
                            (tl2[i + 1].first - tl2[i - 1].first);
          if (ld >= 0.0) continue;
          px.push_back(std::log(lam));
          py.push_back(1.0 / (ld * ld));
        }
        double A2 = 0.0, B2 = 0.0;
        detail::line_fit(px, py, A2, B2);
        double rms2 = 0.0;
        for (size_t i = 0; i < px.size(); ++i) {
          const double d = py[i] - (A2 * px[i] + B2);
          rms2 += d * d;
        }
        res.law_linear_rms = std::sqrt(rms2 / px.size());
      }
    }
    if (lx.size() >= 4) {
      double A = 0.0, B = 0.0;
      detail::line_fit(lx, ly, A, B);
      res.law_slope = A;
      const double t_end = tl.back().first;
      const double lam_end = tl.back().second;
      if (A < 0.0 && A * std::log(lam_end) + B > 0.0) {
        // remaining time: int_0^{lam_end} sqrt(A ln mu + B)^{-1}... with
        // mu = lam_end e^{-tau}:
        // tail = lam_end int_0^inf e^-tau / sqrt(A(ln lam_end - tau) + B) dtau
        const double base = A * std::log(lam_end) + B;
        double tail = 0.0;
        {
          const int NQ = 2000;
          const double T = 50.0, dtau = T / NQ;
          double acc = 0.0;
          for (int k = 0; k <= NQ; ++k) {
            const double tau = k * dtau;
            const double w = (k == 0 || k == NQ) ? 1.0 : (k % 2 ? 4.0 : 2.0);
            acc += w * std::exp(-tau) / std::sqrt(base - A * tau);
          }
          tail = lam_end * acc * dtau / 3.0;
        }
        res.t_star_estimate = t_end + tail;
        const double ld_end = -1.0 / std::sqrt(base);
        const double LA = base / (-A);
        res.t_star_bracket = {
            t_end + lam_end / std::abs(ld_end),
            t_end + std::sqrt(-A) * lam_end * (std::sqrt(LA) + 1.0)};
      }
    }
  }
  return res;
}

}  // namespace collapse::wave
