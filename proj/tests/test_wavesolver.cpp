#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "collapse/wavesolver.hpp"

using namespace collapse;
namespace W = collapse::wave;
namespace P = collapse::profiles;

namespace {

W::SimConfig small_config() {
  W::SimConfig c;
  c.lambda0 = 0.5;
  c.domain_radius = 16.0;
  c.base_h = 1.0 / 16.0;
  c.cfl = 0.4;
  return c;
}

double max_dev_from_instanton(const W::WaveState& st, double lambda0) {
  double worst = 0.0;
  const W::Level& lv = st.levels[0];
  for (int i = 0; i < lv.n(); ++i)
    worst = std::max(worst, std::abs(lv.u[i] - P::chi(lv.r(i) / lambda0)));
  return worst;
}

}  // namespace

TEST_CASE("config validation", "[wavesolver]") {
  W::SimConfig c = small_config();
  c.cfl = 1.2;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.points_per_lambda = 8;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.lambda0 = 2.0;  // needs R >= 40
  CHECK_THROWS_AS(W::init_state(c), std::invalid_argument);
  c.strict_domain_check = false;
  CHECK_NOTHROW(W::init_state(c));
}

TEST_CASE("initial data", "[wavesolver]") {
  W::SimConfig c = small_config();
  c.lambda0 = 1.0;
  c.lambda_dot0 = 0.0;
  c.domain_radius = 20.0;
  auto st = W::init_state(c);
  const W::Level& lv = st.levels[0];
  for (int i = 0; i < lv.n(); i += 17) {
    CHECK(lv.u[i] == P::chi(lv.r(i)));
    CHECK(lv.v[i] == 0.0);
  }
  CHECK(std::abs(lv.u[0] - 1.0) < 4e-3);  // u(0)=1 up to the half-cell offset

  // velocity profile for (1,-1): peak magnitude |ld0| max zeta = 1 at r = 1
  c.lambda_dot0 = -1.0;
  auto st2 = W::init_state(c);
  double peak = 0.0, peak_r = 0.0;
  for (int i = 0; i < st2.levels[0].n(); ++i) {
    if (std::abs(st2.levels[0].v[i]) > peak) {
      peak = std::abs(st2.levels[0].v[i]);
      peak_r = st2.levels[0].r(i);
    }
  }
  CHECK(peak == Catch::Approx(1.0).epsilon(2e-3));
  CHECK(peak_r == Catch::Approx(1.0).margin(c.base_h));
}

TEST_CASE("vacuum is preserved exactly", "[wavesolver]") {
  W::SimConfig c = small_config();
  auto st = W::init_state(c);
  for (auto& x : st.levels[0].u) x = 1.0;
  for (auto& x : st.levels[0].v) x = 0.0;
  st.boundary_ref = {1.0, 1.0};
  for (int k = 0; k < 200; ++k) W::step(st, 0.4 * c.base_h);
  for (double x : st.levels[0].u) CHECK(x == 1.0);
  for (double x : st.levels[0].v) CHECK(x == 0.0);
}

TEST_CASE("static instanton holds at second order", "[wavesolver]") {
  W::SimConfig c = small_config();  // lambda0 = 0.5, R = 16
  auto st = W::init_state(c);
  const double dt = c.cfl * c.base_h;
  const int steps = static_cast<int>(2.0 / dt);
  double worst = 0.0;
  for (int k = 0; k < steps; ++k) {
    W::step(st, dt);
    if (k % 50 == 0) worst = std::max(worst, max_dev_from_instanton(st, 0.5));
  }
  worst = std::max(worst, max_dev_from_instanton(st, 0.5));
  CHECK(worst < 0.02);
  W::check_finite(st);
}

TEST_CASE("energy diagnostics", "[wavesolver]") {
  // vacuum: exactly zero
  W::SimConfig c = small_config();
  auto st = W::init_state(c);
  for (auto& x : st.levels[0].u) x = 1.0;
  for (auto& x : st.levels[0].v) x = 0.0;
  CHECK(W::energy(st) == 0.0);

  // static instanton: 8/3 up to O(h^2) plus the truncated tail
  W::SimConfig c2 = small_config();
  c2.lambda0 = 1.0;
  c2.domain_radius = 24.0;
  c2.base_h = 1.0 / 32.0;
  auto st2 = W::init_state(c2);
  CHECK(W::energy(st2) == Catch::Approx(8.0 / 3.0).margin(5e-3));
}

TEST_CASE("finite propagation speed", "[wavesolver]") {
  W::SimConfig c = small_config();
  c.lambda0 = 1.0;
  c.domain_radius = 20.0;
  auto a = W::init_state(c);
  auto b = W::init_state(c);
  // perturb b only beyond r0 = 8
  const double r0 = 8.0;
  for (int i = 0; i < b.levels[0].n(); ++i) {
    const double r = b.levels[0].r(i);
    if (r > r0 && r < r0 + 1.0)
      b.levels[0].u[i] += 1e-3 * std::sin(8.0 * (r - r0));
  }
  const double dt = c.cfl * c.base_h;
  const double T = 2.0;
  for (int k = 0; k < static_cast<int>(T / dt); ++k) {
    W::step(a, dt);
    W::step(b, dt);
  }
  // numerical cone: one cell per step = t/cfl in distance
  const double clean = r0 - T / c.cfl - 4.0 * c.base_h;
  for (int i = 0; i < a.levels[0].n(); ++i) {
    if (a.levels[0].r(i) < clean) {
      CHECK(a.levels[0].u[i] == b.levels[0].u[i]);
    }
  }
  // physical cone r < r0 - T, with a small margin: spillover is only the
  // numerical cone tail, far below discretization error
  double leak = 0.0;
  for (int i = 0; i < a.levels[0].n(); ++i) {
    if (a.levels[0].r(i) < r0 - T - 1.0)
      leak = std::max(leak, std::abs(a.levels[0].u[i] - b.levels[0].u[i]));
  }
  CHECK(leak < 1e-8);
}

TEST_CASE("curvature extraction", "[wavesolver]") {
  W::SimConfig c = small_config();
  c.lambda0 = 1.0;
  c.domain_radius = 20.0;
  c.base_h = 1.0 / 64.0;
  auto st = W::init_state(c);

  // exact shrunk instanton
  for (int i = 0; i < st.levels[0].n(); ++i)
    st.levels[0].u[i] = P::chi(st.levels[0].r(i) / 0.37);
  CHECK(W::extract_lambda_curvature(st) == Catch::Approx(0.37).epsilon(2e-3));

  for (int i = 0; i < st.levels[0].n(); ++i)
    st.levels[0].u[i] = P::chi(st.levels[0].r(i));
  CHECK(W::extract_lambda_curvature(st) == Catch::Approx(1.0).epsilon(2e-3));

  // positive curvature at the origin: not instanton-like
  for (int i = 0; i < st.levels[0].n(); ++i)
    st.levels[0].u[i] = 2.0 - std::cos(st.levels[0].r(i));
  CHECK_THROWS_AS(W::extract_lambda_curvature(st), W::ExtractionFailure);

  // vacuum: zero curvature
  for (auto& x : st.levels[0].u) x = 1.0;
  CHECK_THROWS_AS(W::extract_lambda_curvature(st), W::ExtractionFailure);
}

TEST_CASE("orthogonality extraction", "[wavesolver]") {
  W::SimConfig c = small_config();
  c.lambda0 = 1.0;
  c.domain_radius = 20.0;
  c.base_h = 1.0 / 64.0;
  auto st = W::init_state(c);
  for (int i = 0; i < st.levels[0].n(); ++i)
    st.levels[0].u[i] = P::chi(st.levels[0].r(i) / 0.37);
  CHECK(W::extract_lambda_orthogonality(st, 0.5) ==
        Catch::Approx(0.37).epsilon(1e-3));
  CHECK(W::extract_lambda_orthogonality(st, 0.37) ==
        Catch::Approx(0.37).epsilon(1e-3));

  for (auto& x : st.levels[0].u) x = 1.0;
  CHECK_THROWS_AS(W::extract_lambda_orthogonality(st, 0.5),
                  W::ExtractionFailure);
}

TEST_CASE("refinement: trigger, interpolation quality, conservation",
          "[wavesolver]") {
  W::SimConfig c = small_config();
  c.lambda0 = 1.0;
  c.domain_radius = 20.0;
  c.base_h = 1.0 / 64.0;
  c.points_per_lambda = 80;  // force a refinement on well-resolved data
  auto st = W::init_state(c);

  const double e0 = W::energy(st);
  auto ev = W::refine_if_needed(st, 1.0, c);
  REQUIRE(ev.has_value());
  CHECK(ev->level == 1);
  CHECK(ev->h_new == Catch::Approx(c.base_h / 2.0));
  CHECK(ev->energy_rel_change < 1e-6);
  CHECK(W::energy(st) == Catch::Approx(e0).epsilon(1e-6));

  // restriction consistency: fine pair averages reproduce the coarse parent
  // up to the point-sample offset h^2 u''/8 of the averaging itself
  const W::Level& par = st.levels[0];
  const W::Level& child = st.levels[1];
  double worst = 0.0;
  for (int k = 0; k + 2 < child.n() / 2; ++k) {
    const double rest = 0.5 * (child.u[2 * k] + child.u[2 * k + 1]);
    worst = std::max(worst, std::abs(rest - par.u[k]));
  }
  CHECK(worst < 1e-4);

  // no trigger when the scale is well resolved
  W::SimConfig c2 = small_config();
  c2.lambda0 = 1.0;
  c2.domain_radius = 20.0;
  c2.base_h = 1.0 / 128.0;  // 128 cells per scale unit
  auto st2 = W::init_state(c2);
  CHECK_FALSE(W::refine_if_needed(st2, 0.5, c2).has_value());

  // level-count guard
  W::SimConfig c3 = small_config();
  c3.max_levels = 1;
  auto st3 = W::init_state(c3);
  CHECK_THROWS_AS(W::refine_if_needed(st3, 1e-3, c3), std::runtime_error);
}

TEST_CASE("static run keeps a constant scale and never refines",
          "[wavesolver]") {
  W::SimConfig c = small_config();
  c.lambda0 = 1.0;
  c.domain_radius = 20.0;
  c.base_h = 1.0 / 32.0;
  c.t_max = 1.0;
  c.steps_per_sample = 8;
  auto res = W::run_simulation(c);
  CHECK(res.refinements.empty());
  CHECK_FALSE(res.collapsed);
  for (const auto& s : res.samples) {
    if (s.lambda_curvature > 0.0)
      CHECK(s.lambda_curvature == Catch::Approx(1.0).margin(5e-3));
    if (s.lambda_orthogonality > 0.0)
      CHECK(s.lambda_orthogonality == Catch::Approx(1.0).margin(5e-3));
  }
  CHECK(res.energy_drift_rel < 1e-3);
}

TEST_CASE("outflow boundary removes pulse energy monotonically",
          "[wavesolver]") {
  W::SimConfig c;
  c.lambda0 = 1.0;
  c.domain_radius = 8.0;
  c.base_h = 1.0 / 32.0;
  c.strict_domain_check = false;
  auto st = W::init_state(c);
  // vacuum plus a compact even pulse
  for (int i = 0; i < st.levels[0].n(); ++i) {
    const double r = st.levels[0].r(i);
    st.levels[0].u[i] = 1.0 + 0.05 * std::exp(-(r - 2.0) * (r - 2.0) * 4.0);
    st.levels[0].v[i] = 0.0;
  }
  st.boundary_ref = {st.levels[0].u[st.levels[0].n() - 2],
                     st.levels[0].u[st.levels[0].n() - 1]};
  const double dt = c.cfl * c.base_h;
  const double e0 = W::energy(st);
  std::vector<double> es;
  // long enough that the once-reflected remnant of the first-order absorber
  // crosses the domain again and leaves too
  for (int k = 0; k < static_cast<int>(26.0 / dt); ++k) {
    W::step(st, dt);
    if (k % 64 == 0) es.push_back(W::energy(st));
  }
  es.push_back(W::energy(st));
  CHECK(es.back() < 0.02 * e0);
  double worst_rise = 0.0;
  for (size_t i = 1; i < es.size(); ++i)
    worst_rise = std::max(worst_rise, es[i] - es[i - 1]);
  CHECK(worst_rise < 2e-3 * e0);
}

TEST_CASE("collapsing run reaches the floor with consistent extractors",
          "[wavesolver]") {
  W::SimConfig c;
  c.lambda0 = 1.0;
  c.lambda_dot0 = -0.5;
  c.domain_radius = 20.0;
  c.base_h = 1.0 / 32.0;
  c.cfl = 0.4;
  c.points_per_lambda = 32;
  c.lambda_min = 0.2;
  c.steps_per_sample = 8;
  auto res = W::run_simulation(c);
  REQUIRE(res.collapsed);
  CHECK(res.extractor_max_reldiff < 0.03);
  CHECK(res.max_abs_field < 1.2);  // profile stays in the instanton range
  CHECK(res.energy_drift_rel < 1e-3);
  CHECK(res.refinements.size() >= 2);  // one octave of depth needs two levels
  // lambda decreases once the collapse is under way
  double prev = 2.0;
  int increases = 0;
  for (const auto& s : res.samples) {
    const double lam = s.lambda_curvature;
    if (lam > 0.0) {
      if (lam > prev + 1e-3) ++increases;
      prev = lam;
    }
  }
  CHECK(increases == 0);
  CHECK(res.t_star_estimate > res.samples.back().t);
}
