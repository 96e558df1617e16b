#pragma once

// Exact and numerical evaluation of the radial integrals behind the
// dilation-law constant gamma = 3/4. The exact path expands every integrand,
// after the substitution x = y^2, as P(x)/(1+x)^n and sums moment integrals
// of x^m/(1+x)^n in rational arithmetic; the numeric path is adaptive
// Gauss-Kronrod quadrature over the radial measure y dy.

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "collapse/gauss_kronrod.hpp"
#include "collapse/profiles.hpp"

namespace collapse::quad {

using BigInt = boost::multiprecision::cpp_int;

// ---- exact rationals -------------------------------------------------------

struct ExactRational {
  BigInt num = 0;
  BigInt den = 1;  // > 0, gcd(|num|, den) == 1

  ExactRational() = default;
  ExactRational(long long n) : num(n) {}
  ExactRational(BigInt n, BigInt d) : num(std::move(n)), den(std::move(d)) {
    reduce();
  }

  void reduce() {
    if (den == 0) throw std::invalid_argument("ExactRational: zero denominator");
    if (den < 0) {
      den = -den;
      num = -num;
    }
    BigInt g = boost::multiprecision::gcd(num < 0 ? BigInt(-num) : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  double to_double() const { return num.convert_to<double>() / den.convert_to<double>(); }

  friend ExactRational operator+(const ExactRational& a, const ExactRational& b) {
    return {a.num * b.den + b.num * a.den, a.den * b.den};
  }
  friend ExactRational operator-(const ExactRational& a, const ExactRational& b) {
    return {a.num * b.den - b.num * a.den, a.den * b.den};
  }
  friend ExactRational operator*(const ExactRational& a, const ExactRational& b) {
    return {a.num * b.num, a.den * b.den};
  }
  friend ExactRational operator/(const ExactRational& a, const ExactRational& b) {
    if (b.num == 0) throw std::domain_error("ExactRational: division by zero");
    return {a.num * b.den, a.den * b.num};
  }
  friend bool operator==(const ExactRational& a, const ExactRational& b) {
    return a.num == b.num && a.den == b.den;
  }
  std::string str() const {
    return num.str() + (den == 1 ? std::string() : "/" + den.str());
  }
};

// ---- the moment formula ----------------------------------------------------

// int_0^inf x^m/(1+x)^n dx = m! (n-m-2)! / (n-1)!  for m <= n-2.
inline ExactRational moment_integral(int m, int n) {
  if (m < 0 || n < 1) throw std::invalid_argument("moment_integral: bad orders");
  if (m > n - 2)
    throw std::domain_error("moment_integral: divergent for m > n-2 (m=" +
                            std::to_string(m) + ", n=" + std::to_string(n) + ")");
  BigInt num = 1, den = 1;
  for (int k = 2; k <= m; ++k) num *= k;
  for (int k = n - m - 1; k <= n - 1; ++k) den *= k;
  return {num, den};
}

// ---- rational functions of x = y^2 ----------------------------------------

// P(x) / (1+x)^pow with exact rational coefficients. Closed under the ring
// operations, division by x (when regular), and the scaling derivative
// y d/dy = 2x d/dx, which is all the identity suite needs.
struct RationalFn {
  std::vector<ExactRational> num;  // num[m] multiplies x^m
  int pow = 0;

  static RationalFn chi() { return {{1, -1}, 1}; }
  static RationalFn zeta() { return {{0, 4}, 2}; }
  static RationalFn xi10() { return {{0, 0, -1}, 2}; }
  static RationalFn eta1() { return {{0, 1}, 2}; }

  RationalFn() = default;
  RationalFn(std::vector<ExactRational> n, int p) : num(std::move(n)), pow(p) {}
  RationalFn(std::initializer_list<long long> n, int p) : pow(p) {
    for (long long c : n) num.emplace_back(c);
  }

  void trim() {
    while (num.size() > 1 && num.back().num == 0) num.pop_back();
  }

  // raise denominator power by k (multiply numerator by (1+x)^k)
  RationalFn promoted(int k) const {
    RationalFn r = *this;
    for (int j = 0; j < k; ++j) {
      std::vector<ExactRational> nn(r.num.size() + 1);
      for (size_t m = 0; m < r.num.size(); ++m) {
        nn[m] = nn[m] + r.num[m];
        nn[m + 1] = nn[m + 1] + r.num[m];
      }
      r.num = std::move(nn);
      ++r.pow;
    }
    return r;
  }

  friend RationalFn operator+(const RationalFn& a, const RationalFn& b) {
    const int p = std::max(a.pow, b.pow);
    RationalFn aa = a.promoted(p - a.pow), bb = b.promoted(p - b.pow);
    RationalFn r;
    r.pow = p;
    r.num.resize(std::max(aa.num.size(), bb.num.size()));
    for (size_t m = 0; m < r.num.size(); ++m) {
      if (m < aa.num.size()) r.num[m] = r.num[m] + aa.num[m];
      if (m < bb.num.size()) r.num[m] = r.num[m] + bb.num[m];
    }
    r.trim();
    return r;
  }
  friend RationalFn operator-(const RationalFn& a, const RationalFn& b) {
    return a + (b * ExactRational(-1));
  }
  friend RationalFn operator*(const RationalFn& a, const RationalFn& b) {
    RationalFn r;
    r.pow = a.pow + b.pow;
    r.num.assign(a.num.size() + b.num.size() - 1, ExactRational());
    for (size_t i = 0; i < a.num.size(); ++i)
      for (size_t j = 0; j < b.num.size(); ++j)
        r.num[i + j] = r.num[i + j] + a.num[i] * b.num[j];
    r.trim();
    return r;
  }
  friend RationalFn operator*(const RationalFn& a, const ExactRational& s) {
    RationalFn r = a;
    for (auto& c : r.num) c = c * s;
    return r;
  }

  // division by x = y^2 (the 1/y^2 factors of the integrands)
  RationalFn div_x() const {
    if (num.empty() || !(num[0].num == 0))
      throw std::domain_error("RationalFn::div_x: nonzero constant term");
    RationalFn r;
    r.pow = pow;
    r.num.assign(num.begin() + 1, num.end());
    if (r.num.empty()) r.num.emplace_back(0);
    return r;
  }

  // y d/dy = 2x d/dx applied to P/(1+x)^k: 2x [P'(1+x) - kP] / (1+x)^{k+1}
  RationalFn scale_deriv() const {
    std::vector<ExactRational> dp(std::max<size_t>(num.size() - 1, 1));
    for (size_t m = 1; m < num.size(); ++m)
      dp[m - 1] = num[m] * ExactRational(static_cast<long long>(m));
    // P'(1+x): shift-add
    std::vector<ExactRational> t(dp.size() + 1);
    for (size_t m = 0; m < dp.size(); ++m) {
      t[m] = t[m] + dp[m];
      t[m + 1] = t[m + 1] + dp[m];
    }
    // minus k P
    std::vector<ExactRational> body(std::max(t.size(), num.size()));
    for (size_t m = 0; m < body.size(); ++m) {
      if (m < t.size()) body[m] = body[m] + t[m];
      if (m < num.size())
        body[m] = body[m] - num[m] * ExactRational(static_cast<long long>(pow));
    }
    // times 2x
    std::vector<ExactRational> out(body.size() + 1);
    for (size_t m = 0; m < body.size(); ++m)
      out[m + 1] = body[m] * ExactRational(2);
    RationalFn r{std::move(out), pow + 1};
    r.trim();
    return r;
  }

  RationalFn B1() const {
    RationalFn d = scale_deriv();
    return (d * ExactRational(-1)) - d.scale_deriv();
  }
  RationalFn B2() const { return scale_deriv(); }

  // exact value of int_0^inf f(y) y dy = (1/2) int_0^inf P(x)/(1+x)^pow dx
  ExactRational integrate_radial_exact() const {
    ExactRational acc;
    for (size_t m = 0; m < num.size(); ++m) {
      if (num[m].num == 0) continue;
      acc = acc + num[m] * moment_integral(static_cast<int>(m), pow);
    }
    return acc * ExactRational{1, 2};
  }

  double eval(double x) const {
    double p = 0.0;
    for (size_t m = num.size(); m-- > 0;) p = p * x + num[m].to_double();
    return p / std::pow(1.0 + x, pow);
  }
};

// ---- numeric radial integration -------------------------------------------

struct RadialResult {
  double value = 0.0;
  double error = 0.0;
};

namespace detail {

// crude decay-rate probe of |f| between y = 1e3 and 4e3
inline double tail_exponent(const std::function<double(double)>& f) {
  const double y1 = 1e3, y2 = 4e3;
  const double a = std::abs(f(y1)), b = std::abs(f(y2));
  if (a < 1e-300 || b < 1e-300) return -1e9;  // numerically dead tail
  return std::log(b / a) / std::log(y2 / y1);
}

}  // namespace detail

// Adaptive quadrature of int_0^inf f(y) y dy. After x = y^2 the measure is
// dx/2; the tail is folded to [0,1] by x -> 1/x. The integrand must decay
// faster than y^-2 (checked unless the caller vouches via tail_exponent_hint).
inline RadialResult integrate_radial(const std::function<double(double)>& f,
                                     double tol = 1e-10,
                                     double tail_exponent_hint = 0.0) {
  if (tail_exponent_hint >= 0.0) {
    const double p = detail::tail_exponent(f);
    if (p > -2.5 && p > -1e8) {
      throw std::runtime_error(
          "integrate_radial: integrand tail decays like y^(" +
          std::to_string(p) + "), too slow for the y dy measure");
    }
  }
  auto g = [&f](double x) { return f(std::sqrt(x)); };
  gk::Result head = gk::integrate(g, 0.0, 1.0, tol);
  auto foldtail = [&g](double u) { return g(1.0 / u) / (u * u); };
  gk::Result tail = gk::integrate(foldtail, 0.0, 1.0, tol);
  return {0.5 * (head.value + tail.value), 0.5 * (head.error + tail.error)};
}

// ---- the identity suite ----------------------------------------------------

struct IdentityRow {
  std::string name;
  ExactRational exact;     // moment-formula value
  double numeric;          // quadrature value
  double residual;         // |numeric - exact|
};

namespace detail {

inline RationalFn zeta_sq() { return RationalFn::zeta() * RationalFn::zeta(); }

inline RationalFn gamma_numerator_fn(const ExactRational& alpha) {
  // xi = xi10 + alpha zeta;  zeta B1 xi - 6 zeta chi xi^2 / x
  RationalFn xi = RationalFn::xi10() + (RationalFn::zeta() * alpha);
  RationalFn t1 = RationalFn::zeta() * xi.B1();
  RationalFn t2 =
      ((RationalFn::zeta() * RationalFn::chi() * xi * xi).div_x()) * ExactRational(6);
  return t1 - t2;
}

}  // namespace detail

inline ExactRational compute_gamma_exact() {
  return detail::gamma_numerator_fn(ExactRational(0)).integrate_radial_exact() /
         detail::zeta_sq().integrate_radial_exact();
}

inline double compute_gamma(double tol = 1e-12) {
  using namespace profiles;
  auto numer = [](double y) {
    const double x = xi10(y);
    return zeta(y) * (B1_xi10(y) - 6.0 * chi(y) * x * x / (y * y));
  };
  auto denom = [](double y) { return zeta(y) * zeta(y); };
  const RadialResult n = integrate_radial(numer, tol);
  const RadialResult d = integrate_radial(denom, tol);
  return n.value / d.value;
}

// gamma numerator with the gauge shift xi10 -> xi10 + alpha zeta, minus the
// unshifted value; vanishes identically in alpha.
inline double gauge_invariance_check(double alpha, double tol = 1e-12) {
  using namespace profiles;
  auto numer = [alpha](double y) {
    const double xi = xi10(y) + alpha * zeta(y);
    const double b1 = B1_xi10(y) + alpha * B1_zeta(y);
    return zeta(y) * (b1 - 6.0 * chi(y) * xi * xi / (y * y));
  };
  auto base = [](double y) {
    const double x = xi10(y);
    return zeta(y) * (B1_xi10(y) - 6.0 * chi(y) * x * x / (y * y));
  };
  return integrate_radial(numer, tol).value - integrate_radial(base, tol).value;
}

inline ExactRational gauge_invariance_check_exact(const ExactRational& alpha) {
  return detail::gamma_numerator_fn(alpha).integrate_radial_exact() -
         detail::gamma_numerator_fn(ExactRational(0)).integrate_radial_exact();
}

// Evaluates the named integral identities both exactly (moment expansion)
// and numerically, and reports residuals.
inline std::vector<IdentityRow> identity_suite(double tol = 1e-12) {
  using namespace profiles;
  using RF = RationalFn;
  std::vector<IdentityRow> rows;

  auto push = [&rows, tol](const std::string& name, const RF& fn,
                           const std::function<double(double)>& num) {
    IdentityRow row;
    row.name = name;
    row.exact = fn.integrate_radial_exact();
    row.numeric = integrate_radial(num, tol, -4.0).value;
    row.residual = std::abs(row.numeric - row.exact.to_double());
    rows.push_back(std::move(row));
  };

  push("int zeta^2", detail::zeta_sq(),
       [](double y) { return zeta(y) * zeta(y); });
  push("int zeta B1 zeta", RF::zeta() * RF::zeta().B1(),
       [](double y) { return zeta(y) * B1_zeta(y); });
  push("int zeta B1 chi", RF::zeta() * RF::chi().B1(),
       [](double y) { return zeta(y) * B1_chi(y); });
  push("int zeta^2 chi xi10 / y^2",
       (RF::zeta() * RF::zeta() * RF::chi() * RF::xi10()).div_x(),
       [](double y) { return zeta(y) * zeta(y) * chi(y) * xi10(y) / (y * y); });
  // coefficient of the gauge parameter in the orthogonality relation
  push("alpha linear coefficient",
       (RF::zeta() * RF::zeta().B1()) -
           (RF::zeta() * RF::zeta() * RF::chi() * RF::xi10()).div_x() *
               ExactRational(12),
       [](double y) {
         return zeta(y) * B1_zeta(y) -
                12.0 * zeta(y) * zeta(y) * chi(y) * xi10(y) / (y * y);
       });
  // its quadratic companion
  push("alpha quadratic coefficient",
       (RF::zeta() * RF::zeta() * RF::zeta() * RF::chi()).div_x(),
       [](double y) {
         const double z = zeta(y);
         return z * z * z * chi(y) / (y * y);
       });
  push("gamma numerator", detail::gamma_numerator_fn(ExactRational(0)),
       [](double y) {
         const double x = xi10(y);
         return zeta(y) * (B1_xi10(y) - 6.0 * chi(y) * x * x / (y * y));
       });

  // the ratio itself
  {
    IdentityRow row;
    row.name = "gamma";
    row.exact = compute_gamma_exact();
    row.numeric = compute_gamma(tol);
    row.residual = std::abs(row.numeric - row.exact.to_double());
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace collapse::quad
