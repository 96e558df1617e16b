#pragma once

// Discretized linearized operator L = -lap_y - f'(chi)/y^2 around the
// instanton on a radial grid, with the flux-form stencil that is exactly
// symmetric under the discrete y dy inner product; variation-of-constants
// solver built on the homogeneous pair (eta1, eta2); assembly of the
// second-order perturbative right-hand side.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "collapse/profiles.hpp"
#include "collapse/quadrature.hpp"

namespace collapse::lin {

enum class OuterBC { dirichlet, zero_flux };

// Cell-centered uniform grid y_i = (i + 1/2) h on [0, ymax]. The origin rows
// of the operator assume this layout (even reflection through y = 0).
inline std::vector<double> cell_centered_grid(double h, double ymax) {
  if (h <= 0.0 || ymax <= h) throw std::invalid_argument("cell_centered_grid");
  const int n = static_cast<int>(std::floor(ymax / h + 0.5));
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) y[i] = (i + 0.5) * h;
  return y;
}

// Tridiagonal action of L. Interior rows discretize -(1/y)(y u')' in flux
// form on the faces midway between nodes; the innermost face sits at y = 0
// where the radial flux vanishes (even solutions), the outermost row closes
// with a zero-value ghost (dirichlet) or a vanishing outer flux (zero_flux).
struct DiscreteOperator {
  std::vector<double> y;
  std::vector<double> lower, diag, upper;  // row i: lower[i] u_{i-1} + diag[i] u_i + upper[i] u_{i+1}
  std::vector<double> weight;              // control-volume widths
  OuterBC bc = OuterBC::dirichlet;

  int n() const { return static_cast<int>(y.size()); }

  std::vector<double> apply(const std::vector<double>& u) const {
    if (u.size() != y.size()) throw std::invalid_argument("apply: size mismatch");
    const int N = n();
    std::vector<double> out(N);
    for (int i = 0; i < N; ++i) {
      double v = diag[i] * u[i];
      if (i > 0) v += lower[i] * u[i - 1];
      if (i + 1 < N) v += upper[i] * u[i + 1];
      out[i] = v;
    }
    return out;
  }

  // discrete y dy inner product
  double inner(const std::vector<double>& a, const std::vector<double>& b) const {
    double s = 0.0;
    for (int i = 0; i < n(); ++i) s += a[i] * b[i] * y[i] * weight[i];
    return s;
  }
};

inline DiscreteOperator build_L(const std::vector<double>& grid,
                                OuterBC bc = OuterBC::dirichlet) {
  const int N = static_cast<int>(grid.size());
  if (N < 3) throw std::invalid_argument("build_L: need at least 3 nodes");
  for (int i = 0; i + 1 < N; ++i)
    if (!(grid[i] > 0.0) || !(grid[i + 1] > grid[i]))
      throw std::invalid_argument("build_L: grid must be positive and increasing");

  DiscreteOperator op;
  op.y = grid;
  op.bc = bc;
  op.lower.assign(N, 0.0);
  op.diag.assign(N, 0.0);
  op.upper.assign(N, 0.0);
  op.weight.assign(N, 0.0);

  // faces: f_0 = 0 (origin), f_i between nodes i-1 and i, outer at +h/2
  std::vector<double> face(N + 1);
  face[0] = 0.0;
  for (int i = 1; i < N; ++i) face[i] = 0.5 * (grid[i - 1] + grid[i]);
  face[N] = grid[N - 1] + 0.5 * (grid[N - 1] - grid[N - 2]);

  for (int i = 0; i < N; ++i) {
    const double w = face[i + 1] - face[i];
    op.weight[i] = w;
    const double denom = grid[i] * w;
    // inner flux
    if (i > 0) {
      const double t = face[i] / ((grid[i] - grid[i - 1]) * denom);
      op.lower[i] += -t;  // -(1/yw)[ -f_i (u_i - u_{i-1})/h ] expanded below
      op.diag[i] += t;
    }
    // outer flux
    if (i + 1 < N) {
      const double t = face[i + 1] / ((grid[i + 1] - grid[i]) * denom);
      op.diag[i] += t;
      op.upper[i] += -t;
    } else if (bc == OuterBC::dirichlet) {
      // ghost value 0 at one spacing beyond the last node
      const double h = grid[N - 1] - grid[N - 2];
      const double t = face[N] / (h * denom);
      op.diag[i] += t;
    }
    // potential
    const double fp = profiles::f_nonlin_d(profiles::chi(grid[i]));
    op.diag[i] += -fp / (grid[i] * grid[i]);
  }
  return op;
}

// max-norm of (L u - rhs) over nodes with y in [ylo, yhi], skipping the
// outermost row (its closure is not a consistency statement about rhs)
inline double residual_inf(const DiscreteOperator& op,
                           const std::function<double(double)>& u,
                           const std::function<double(double)>& rhs,
                           double ylo = 0.0, double yhi = 1e300) {
  const int N = op.n();
  std::vector<double> uv(N);
  for (int i = 0; i < N; ++i) uv[i] = u(op.y[i]);
  std::vector<double> Lu = op.apply(uv);
  double worst = 0.0;
  for (int i = 0; i + 1 < N; ++i) {
    if (op.y[i] < ylo || op.y[i] > yhi) continue;
    worst = std::max(worst, std::abs(Lu[i] - rhs(op.y[i])));
  }
  return worst;
}

// Smallest eigenvalue of the symmetrized operator (Sturm bisection on the
// similarity-transformed tridiagonal). The grid truncation makes this
// accurate only to O(1/ymax^2) for the continuum operator.
inline double smallest_eigenvalue(const DiscreteOperator& op, double tol = 1e-10) {
  const int N = op.n();
  std::vector<double> d(N), e(N - 1);  // diagonal, off-diagonal
  for (int i = 0; i < N; ++i) d[i] = op.diag[i];
  for (int i = 0; i + 1 < N; ++i) {
    const double wi = op.y[i] * op.weight[i];
    const double wj = op.y[i + 1] * op.weight[i + 1];
    e[i] = op.upper[i] * std::sqrt(wi / wj);
  }
  // Gershgorin bounds
  double lo = d[0], hi = d[0];
  for (int i = 0; i < N; ++i) {
    double r = 0.0;
    if (i > 0) r += std::abs(e[i - 1]);
    if (i + 1 < N) r += std::abs(e[i]);
    lo = std::min(lo, d[i] - r);
    hi = std::max(hi, d[i] + r);
  }
  auto count_below = [&](double sigma) {
    // negative pivots of LDL^T of (T - sigma I)
    int cnt = 0;
    double piv = d[0] - sigma;
    if (piv < 0) ++cnt;
    for (int i = 1; i < N; ++i) {
      const double off = e[i - 1];
      double denom = piv;
      if (std::abs(denom) < 1e-300) denom = (denom < 0 ? -1e-300 : 1e-300);
      piv = (d[i] - sigma) - off * off / denom;
      if (piv < 0) ++cnt;
    }
    return cnt;
  };
  double a = lo, b = hi;
  while (b - a > tol * std::max(1.0, std::abs(a) + std::abs(b))) {
    const double m = 0.5 * (a + b);
    if (count_below(m) >= 1)
      b = m;
    else
      a = m;
  }
  return 0.5 * (a + b);
}

// ---- variation of constants -----------------------------------------------

struct SampledSolution {
  std::vector<double> y;
  std::vector<double> w;
  std::vector<double> c1, c2;  // coefficient functions along the grid
};

namespace detail {
// 7-point Gauss-Legendre nodes/weights on [-1,1]
inline constexpr double kGx[7] = {
    -0.949107912342758524526189684047851, -0.741531185599394439863864773280788,
    -0.405845151377397166906606412076961, 0.0,
    0.405845151377397166906606412076961,  0.741531185599394439863864773280788,
    0.949107912342758524526189684047851};
inline constexpr double kGw[7] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
    0.381830050505118944950369775488975, 0.279705391489276667901467771423780,
    0.129484966168869693270611432679082};

template <typename F>
double gauss7(F&& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double s = 0.0;
  for (int j = 0; j < 7; ++j) s += kGw[j] * f(c + h * kGx[j]);
  return s * h;
}
}  // namespace detail

// Particular solution of L w = rhs, regular at the origin, in the gauge
// where the coefficient of the regular homogeneous direction vanishes at
// y = 0:  w = c1 eta1 + c2 eta2 with
//   c1(y) =  int_0^y eta2 rhs s ds,   c2(y) = -int_0^y eta1 rhs s ds.
// The Wronskian y (eta1 eta2' - eta1' eta2) = 1 enters in closed form.
inline SampledSolution solve_variation_of_constants(
    const std::function<double(double)>& rhs, double y_max, int n_nodes = 1200) {
  if (y_max <= 0.1) throw std::invalid_argument("solve_variation_of_constants: y_max too small");
  // reject sources more singular than 1/y at the origin
  {
    const double f1 = std::abs(rhs(1e-5)), f2 = std::abs(rhs(1e-6));
    if (f2 > 1e-8 && f1 > 1e-8) {
      const double p = std::log(f2 / f1) / std::log(1e-6 / 1e-5);
      if (p <= -1.0 + 1e-6)
        throw std::invalid_argument(
            "solve_variation_of_constants: rhs singular like y^(" +
            std::to_string(p) + ") at the origin");
    }
  }
  SampledSolution out;
  const double y_lo = 1e-4;
  const int n_log = n_nodes;
  out.y.resize(n_log);
  const double r = std::log(y_max / y_lo);
  for (int i = 0; i < n_log; ++i)
    out.y[i] = y_lo * std::exp(r * i / (n_log - 1.0));
  out.c1.resize(n_log);
  out.c2.resize(n_log);
  out.w.resize(n_log);

  auto f1 = [&rhs](double s) { return profiles::eta2(s) * rhs(s) * s; };
  auto f2 = [&rhs](double s) { return profiles::eta1(s) * rhs(s) * s; };

  double acc1 = 0.0, acc2 = 0.0, prev = 0.0;
  for (int i = 0; i < n_log; ++i) {
    // subdivide the first segment; eta2 ~ -1/(4 s^2) amplifies rhs near 0
    if (i == 0) {
      const int sub = 64;
      for (int k = 0; k < sub; ++k) {
        const double a = out.y[0] * k / sub, b = out.y[0] * (k + 1) / sub;
        if (a == 0.0) {
          // open the very first panel slightly; integrand is integrable
          acc1 += detail::gauss7(f1, 1e-12, b);
          acc2 += detail::gauss7(f2, 1e-12, b);
        } else {
          acc1 += detail::gauss7(f1, a, b);
          acc2 += detail::gauss7(f2, a, b);
        }
      }
    } else {
      const int sub = 4;
      for (int k = 0; k < sub; ++k) {
        const double a = prev + (out.y[i] - prev) * k / sub;
        const double b = prev + (out.y[i] - prev) * (k + 1) / sub;
        acc1 += detail::gauss7(f1, a, b);
        acc2 += detail::gauss7(f2, a, b);
      }
    }
    prev = out.y[i];
    out.c1[i] = acc1;
    out.c2[i] = -acc2;
    out.w[i] = out.c1[i] * profiles::eta1(out.y[i]) +
               out.c2[i] * profiles::eta2(out.y[i]);
  }
  return out;
}

// ---- perturbative right-hand side -----------------------------------------

struct PerturbationRHS {
  int order = 2;
  std::vector<double> y;
  std::vector<double> F;
};

// F2 = B1 xi10 + gamma B2 chi - 6 chi xi10^2 / y^2  (B2 chi = -zeta)
inline double F2_at(double y, double gamma) {
  using namespace profiles;
  const double x = xi10(y);
  return B1_xi10(y) - gamma * zeta(y) - 6.0 * chi(y) * x * x / (y * y);
}

inline PerturbationRHS assemble_F2(double gamma,
                                   const std::vector<double>& grid) {
  PerturbationRHS r;
  r.order = 2;
  r.y = grid;
  r.F.resize(grid.size());
  for (size_t i = 0; i < grid.size(); ++i) r.F[i] = F2_at(grid[i], gamma);
  return r;
}

// Solvability functional int zeta F2 y dy; affine in gamma with slope
// -int zeta^2 = -8/3 and root at gamma = 3/4.
inline double solvability_integral(double gamma, double tol = 1e-11) {
  auto f = [gamma](double y) { return profiles::zeta(y) * F2_at(y, gamma); };
  return quad::integrate_radial(f, tol, -4.0).value;
}

}  // namespace collapse::lin
