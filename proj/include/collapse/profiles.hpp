#pragma once

// Closed-form radial profiles of the critical d=4 equivariant collapse
// problem: the instanton chi, its zero mode zeta, the first-order profile
// correction xi10, the homogeneous pair (eta1, eta2) of the linearized
// operator, and the second-order inner correction w2 built from them by
// variation of constants. All first and second derivatives are hand-derived
// closed forms (no AD), unit-tested against finite differences.

#include <cmath>
#include <stdexcept>
#include <string>

#include "collapse/gauss_kronrod.hpp"

namespace collapse::profiles {

inline constexpr double kGamma = 0.75;  // coefficient of the dilation law

enum class Kind { chi, zeta, xi10, eta1, eta2, w2 };

inline const char* kind_name(Kind k) {
  switch (k) {
    case Kind::chi: return "chi";
    case Kind::zeta: return "zeta";
    case Kind::xi10: return "xi10";
    case Kind::eta1: return "eta1";
    case Kind::eta2: return "eta2";
    case Kind::w2: return "w2";
  }
  return "?";
}

// ---- instanton -----------------------------------------------------------

inline double chi(double y) {
  const double u = 1.0 + y * y;
  return (1.0 - y * y) / u;
}
inline double chi_d1(double y) {
  const double u = 1.0 + y * y;
  return -4.0 * y / (u * u);
}
inline double chi_d2(double y) {
  const double u = 1.0 + y * y;
  return 4.0 * (3.0 * y * y - 1.0) / (u * u * u);
}

// ---- zero mode zeta = -y chi' ---------------------------------------------

inline double zeta(double y) {
  const double u = 1.0 + y * y;
  return 4.0 * y * y / (u * u);
}
inline double zeta_d1(double y) {
  const double u = 1.0 + y * y;
  return 8.0 * y * (1.0 - y * y) / (u * u * u);
}
inline double zeta_d2(double y) {
  const double u = 1.0 + y * y;
  const double y2 = y * y;
  return 8.0 * (1.0 - 8.0 * y2 + 3.0 * y2 * y2) / (u * u * u * u);
}

// ---- first-order correction ----------------------------------------------

inline double xi10(double y) {
  const double u = 1.0 + y * y;
  return -y * y * y * y / (u * u);
}
inline double xi10_d1(double y) {
  const double u = 1.0 + y * y;
  return -4.0 * y * y * y / (u * u * u);
}
inline double xi10_d2(double y) {
  const double u = 1.0 + y * y;
  const double y2 = y * y;
  return 12.0 * y2 * (y2 - 1.0) / (u * u * u * u);
}

// ---- homogeneous solutions of the linearized operator ---------------------

inline double eta1(double y) { return 0.25 * zeta(y); }
inline double eta1_d1(double y) { return 0.25 * zeta_d1(y); }
inline double eta1_d2(double y) { return 0.25 * zeta_d2(y); }

// eta2 grows like y^2/4 at infinity and is singular (-1/(4y^2)) at the
// origin. Partial-fraction form, stable at both ends.
inline double eta2(double y) {
  const double y2 = y * y;
  const double u = 1.0 + y2;
  return 0.25 * y2 + 1.5 - 3.0 / u - 0.25 / y2 + 6.0 * y2 * std::log(y) / (u * u);
}
inline double eta2_d1(double y) {
  const double y2 = y * y;
  const double u = 1.0 + y2;
  const double ly = std::log(y);
  return 0.5 * y + 0.5 / (y2 * y) + 12.0 * y * (1.0 + ly) / (u * u) -
         24.0 * y2 * y * ly / (u * u * u);
}
inline double eta2_d2(double y) {
  const double y2 = y * y;
  const double u = 1.0 + y2;
  const double ly = std::log(y);
  return 0.5 - 1.5 / (y2 * y2) + (24.0 + 12.0 * ly) / (u * u) -
         (72.0 * y2 + 120.0 * y2 * ly) / (u * u * u) +
         144.0 * y2 * y2 * ly / (u * u * u * u);
}

// ---- the dilogarithm-type integral entering c1 -----------------------------

// Integral of ln(s)/(1+s) over [0, z]. The [0,1] piece is integrated in the
// variable s = exp(-t) to tame the logarithmic endpoint.
inline double log_kernel_integral(double z, double tol = 1e-12) {
  if (z < 0.0) throw std::domain_error("log_kernel_integral: z < 0");
  if (z == 0.0) return 0.0;
  const double z1 = std::min(z, 1.0);
  // s = exp(-t): int_0^{z1} ln s/(1+s) ds = -int_{t1}^{inf} t e^{-t}/(1+e^{-t}) dt
  const double t1 = -std::log(z1);
  auto tail = [](double t) { return t * std::exp(-t) / (1.0 + std::exp(-t)); };
  double v = -gk::integrate(tail, t1, std::max(t1 + 50.0, 60.0), tol).value;
  if (z > 1.0) {
    auto f = [](double s) { return std::log(s) / (1.0 + s); };
    // split a long range once at sqrt(z) to help the adaptive pass
    if (z > 100.0) {
      v += gk::integrate(f, 1.0, std::sqrt(z), tol).value;
      v += gk::integrate(f, std::sqrt(z), z, tol).value;
    } else {
      v += gk::integrate(f, 1.0, z, tol).value;
    }
  }
  return v;
}

// ---- w2 = c1 eta1 + c2 eta2 ------------------------------------------------

// Coefficient functions of the variation-of-constants solution of
// L w2 = 2 gamma xi10 (gauge: c1(0) = -gamma, the convention that makes the
// large-y expansion of w2 carry no stray multiple of eta1).
inline double w2_c1(double y, double gamma = kGamma) {
  if (y <= 0.0) throw std::domain_error("w2_c1: requires y > 0");
  const double y2 = y * y;
  const double u = 1.0 + y2;
  const double l2 = std::log(y2);
  const double braces = y2 * y2 / 8.0 + y2 - 4.0 / u + 1.0 / (u * u) -
                        y2 * y2 * y2 * l2 / (u * u * u) -
                        1.5 * y2 * y2 * l2 / (u * u) - 3.0 * y2 * l2 / u +
                        3.0 * log_kernel_integral(y2) + 4.0;
  return -gamma * braces;
}

// c2(y) = gamma * int_0^{y^2} x^3/(1+x)^4 dx in closed form. Nonnegative and
// increasing; grows like gamma*ln(y^2) at infinity. The closed form cancels
// catastrophically for small y (an O(y^8) result from O(1) terms), so below
// y = 0.1 the integral's series is summed instead.
inline double w2_c2(double y, double gamma = kGamma) {
  if (y <= 0.0) throw std::domain_error("w2_c2: requires y > 0");
  const double v = y * y;
  if (v <= 0.01) {
    // int_0^v x^3 (1+x)^-4 dx = sum_k binom(k+3,3) (-1)^k v^{k+4}/(k+4)
    double acc = 0.0, binom = 1.0, sign = 1.0, vpow = v * v * v * v;
    for (int k = 0; k < 16; ++k) {
      acc += sign * binom * vpow / (k + 4);
      sign = -sign;
      binom *= (k + 4.0) / (k + 1.0);
      vpow *= v;
    }
    return gamma * acc;
  }
  const double u = 1.0 + v;
  return gamma * (std::log(u) + 3.0 / u - 1.5 / (u * u) + 1.0 / (3.0 * u * u * u) -
                  11.0 / 6.0);
}

// derivatives of the coefficient functions (variation-of-constants identities)
inline double w2_c1_d1(double y, double gamma = kGamma) {
  return 2.0 * gamma * eta2(y) * xi10(y) * y;
}
inline double w2_c2_d1(double y, double gamma = kGamma) {
  return -2.0 * gamma * eta1(y) * xi10(y) * y;
}

namespace detail {
// Below the cutoff the combination c1 eta1 + c2 eta2 is evaluated by its
// Taylor expansion; the individually singular pieces cancel there.
inline constexpr double kW2SeriesCutoff = 1e-3;
}  // namespace detail

inline double w2(double y, double gamma = kGamma) {
  if (y < 0.0) throw std::domain_error("w2: requires y >= 0");
  if (y < detail::kW2SeriesCutoff) {
    const double y2 = y * y;
    return -gamma * y2 * (1.0 - 2.0 * y2);
  }
  return w2_c1(y, gamma) * eta1(y) + w2_c2(y, gamma) * eta2(y);
}
inline double w2_d1(double y, double gamma = kGamma) {
  if (y < 0.0) throw std::domain_error("w2_d1: requires y >= 0");
  if (y < detail::kW2SeriesCutoff) {
    return -gamma * (2.0 * y - 8.0 * y * y * y);
  }
  return w2_c1(y, gamma) * eta1_d1(y) + w2_c2(y, gamma) * eta2_d1(y);
}
inline double w2_d2(double y, double gamma = kGamma) {
  if (y < 0.0) throw std::domain_error("w2_d2: requires y >= 0");
  if (y < detail::kW2SeriesCutoff) {
    return -gamma * (2.0 - 24.0 * y * y);
  }
  return w2_c1(y, gamma) * eta1_d2(y) + w2_c2(y, gamma) * eta2_d2(y) -
         2.0 * gamma * xi10(y);
}

// ---- dispatch --------------------------------------------------------------

inline double eval_profile(Kind k, double y) {
  if (y < 0.0)
    throw std::domain_error(std::string("eval_profile(") + kind_name(k) +
                            "): negative radius");
  switch (k) {
    case Kind::chi: return chi(y);
    case Kind::zeta: return zeta(y);
    case Kind::xi10: return xi10(y);
    case Kind::eta1: return eta1(y);
    case Kind::eta2: return eta2(y);
    case Kind::w2: return w2(y);
  }
  throw std::invalid_argument("eval_profile: bad kind");
}

inline double eval_deriv1(Kind k, double y) {
  if (y < 0.0) throw std::domain_error("eval_deriv1: negative radius");
  switch (k) {
    case Kind::chi: return chi_d1(y);
    case Kind::zeta: return zeta_d1(y);
    case Kind::xi10: return xi10_d1(y);
    case Kind::eta1: return eta1_d1(y);
    case Kind::eta2: return eta2_d1(y);
    case Kind::w2: return w2_d1(y);
  }
  throw std::invalid_argument("eval_deriv1: bad kind");
}

inline double eval_deriv2(Kind k, double y) {
  if (y < 0.0) throw std::domain_error("eval_deriv2: negative radius");
  switch (k) {
    case Kind::chi: return chi_d2(y);
    case Kind::zeta: return zeta_d2(y);
    case Kind::xi10: return xi10_d2(y);
    case Kind::eta1: return eta1_d2(y);
    case Kind::eta2: return eta2_d2(y);
    case Kind::w2: return w2_d2(y);
  }
  throw std::invalid_argument("eval_deriv2: bad kind");
}

// A profile as an evaluable triple (value, first, second derivative).
struct ProfileFns {
  double (*f)(double);
  double (*d1)(double);
  double (*d2)(double);
};

inline ProfileFns profile(Kind k) {
  switch (k) {
    case Kind::chi: return {&chi, &chi_d1, &chi_d2};
    case Kind::zeta: return {&zeta, &zeta_d1, &zeta_d2};
    case Kind::xi10: return {&xi10, &xi10_d1, &xi10_d2};
    case Kind::eta1: return {&eta1, &eta1_d1, &eta1_d2};
    case Kind::eta2: return {&eta2, &eta2_d1, &eta2_d2};
    case Kind::w2:
      return {[](double y) { return w2(y); }, [](double y) { return w2_d1(y); },
              [](double y) { return w2_d2(y); }};
  }
  throw std::invalid_argument("profile: bad kind");
}

// ---- scaling-group operators ----------------------------------------------

// B1 p = -(y d/dy) p - (y d/dy)^2 p = -2 y p' - y^2 p''
template <typename P>
inline double apply_B1(const P& p, double y) {
  if (y < 0.0) throw std::domain_error("apply_B1: negative radius");
  return -2.0 * y * p.d1(y) - y * y * p.d2(y);
}

// B2 p = y p'
template <typename P>
inline double apply_B2(const P& p, double y) {
  if (y < 0.0) throw std::domain_error("apply_B2: negative radius");
  return y * p.d1(y);
}

inline double apply_B1(Kind k, double y) { return apply_B1(profile(k), y); }
inline double apply_B2(Kind k, double y) { return apply_B2(profile(k), y); }

// closed rational forms (avoid derivative round-off where they matter)
inline double B1_chi(double y) {
  const double x = y * y, u = 1.0 + x;
  return 4.0 * x * (3.0 - x) / (u * u * u);
}
inline double B1_zeta(double y) {
  const double x = y * y, u = 1.0 + x;
  return 8.0 * x * (-3.0 + 8.0 * x - x * x) / (u * u * u * u);
}
inline double B1_xi10(double y) {
  const double x = y * y, u = 1.0 + x;
  return 4.0 * x * x * (5.0 - x) / (u * u * u * u);
}

// ---- nonlinearity ----------------------------------------------------------

inline double f_nonlin(double u) { return 2.0 * u * (1.0 - u * u); }
inline double f_nonlin_d(double u) { return 2.0 - 6.0 * u * u; }

// N(chi, w) = f(chi + w) - f(chi) - f'(chi) w; equals -6 chi w^2 - 2 w^3.
inline double N_defect(double chi_val, double w) {
  return f_nonlin(chi_val + w) - f_nonlin(chi_val) - f_nonlin_d(chi_val) * w;
}
inline double N_closed(double chi_val, double w) {
  return -6.0 * chi_val * w * w - 2.0 * w * w * w;
}

}  // namespace collapse::profiles
