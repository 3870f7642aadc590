#include <cmath>
#include <numbers>

#include "doctest.h"
#include "slabflow/error.hpp"
#include "slabflow/iteration.hpp"
#include "slabflow/random_fields.hpp"

using namespace slabflow;
using std::numbers::pi;

namespace {

GridPtr make_grid(int n, int nz) {
  GridSpec s;
  s.N1 = n;
  s.N2 = n;
  s.Nz = nz;
  return Grid::create(s);
}

Trajectory constant_trajectory(const GridPtr& g, const SlabVector& u, const SlabField& p, const TimeGrid& tg) {
  Trajectory t;
  t.time = tg;
  for (int n = 0; n <= tg.steps; ++n) t.states.push_back(FlowState{tg.time(n), u, p, SurfaceField(g), SurfaceField(g)});
  return t;
}

InitialData relaxation_data(const GridPtr& g, double amp) {
  auto eta0 = SurfaceField::from_function(g, [amp](double x1, double) { return amp * std::cos(2 * pi * x1); });
  auto flat = BottomProfile::flat(g);
  return build_initial_data(zero_vector(g), eta0, flat, choose_epsilon(eta0, flat));
}

}  // namespace

TEST_CASE("N-distance: identity, offsets, homogeneity") {
  auto g = make_grid(8, 9);
  auto tg = TimeGrid::over(0.3, 0.1);
  TrialRng rng(11);
  const SlabVector u = random_clamped_vector(g, rng, 3);
  const SlabField p = random_slab(g, rng, 3);
  auto a = constant_trajectory(g, u, p, tg);
  CHECK(picard_distance_N(a, a) == 0.0);

  const SlabVector w = random_clamped_vector(g, rng, 3);
  auto b = constant_trajectory(g, u + w, p, tg);
  const double direct = std::pow(sobolev_norm_slab(w, 2), 2) + tg.end() * std::pow(sobolev_norm_slab(w, 3), 2);
  CHECK(picard_distance_N(a, b) == doctest::Approx(direct).epsilon(1e-12));
  CHECK(picard_distance_N(b, a) == doctest::Approx(picard_distance_N(a, b)).epsilon(1e-14));
  auto c = constant_trajectory(g, u + 2.0 * w, p, tg);
  CHECK(picard_distance_N(a, c) == doctest::Approx(4 * picard_distance_N(a, b)).epsilon(1e-12));

  CHECK_THROWS_AS(picard_distance_N(a, constant_trajectory(g, u, p, TimeGrid::over(0.4, 0.1))), ConfigError);
}

TEST_CASE("M-distance: identity and homogeneity") {
  auto g = make_grid(8, 5);
  TrialRng rng(12);
  SurfaceTrajectory a;
  a.time = TimeGrid::over(0.2, 0.1);
  for (int n = 0; n < 3; ++n) {
    a.eta.push_back(random_surface(g, rng, 3));
    a.deta_dt.push_back(random_surface(g, rng, 3));
  }
  CHECK(picard_distance_M(a, a) == 0.0);
  SurfaceTrajectory b = a;
  for (auto& e : b.eta) e += SurfaceField::from_function(g, [](double x1, double) { return 0.01 * std::cos(2 * pi * x1); });
  const double d = picard_distance_M(a, b);
  const double direct = std::pow(sobolev_norm_surface(a.eta[0] - b.eta[0], 2.5), 2);
  CHECK(d == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("functionals") {
  auto g = make_grid(8, 9);
  auto tg = TimeGrid::over(0.5, 0.1);
  auto zero = functionals(constant_trajectory(g, zero_vector(g), SlabField(g), tg));
  CHECK(zero.E_up == 0.0);
  CHECK(zero.D_up == 0.0);
  CHECK(zero.K_eta == 0.0);
  CHECK(zero.Q_u == 0.0);
  CHECK(!zero.truncations.empty());

  TrialRng rng(13);
  const SlabVector u = random_clamped_vector(g, rng, 3);
  auto f = functionals(constant_trajectory(g, u, SlabField(g), tg));
  const double u2 = std::pow(sobolev_norm_slab(u, 2), 2), u3 = std::pow(sobolev_norm_slab(u, 3), 2);
  CHECK(f.Q_u == doctest::Approx(tg.end() * u3 + u2).epsilon(1e-12));
  CHECK(f.E_up == doctest::Approx(u2).epsilon(1e-12));

  auto longer = functionals(constant_trajectory(g, u, SlabField(g), TimeGrid::over(1.0, 0.1)));
  CHECK(longer.D_up >= f.D_up);
  CHECK(longer.D_eta >= f.D_eta);
}

TEST_CASE("Picard: equilibrium is a fixed point") {
  auto g = make_grid(8, 9);
  auto data = build_initial_data(zero_vector(g), SurfaceField(g), BottomProfile::flat(g), ExtensionParams{});
  PicardConfig cfg;
  cfg.T = 1.0;
  cfg.dt = 0.01;
  auto r = run_picard(data, cfg);
  CHECK(r.report.converged);
  CHECK(r.report.sweep_count == 1);
  CHECK(r.report.nonlinear_residual < 1e-10);
  REQUIRE(r.traj.states.size() == 101);
  for (const auto& s : r.traj.states) {
    CHECK(max_abs(s.u) <= 1e-10);
    CHECK(s.eta.max_abs() <= 1e-10);
  }
}

TEST_CASE("Picard: relaxation of a surface bump contracts") {
  auto g = make_grid(16, 17);
  auto data = relaxation_data(g, 0.02);
  PicardConfig cfg;
  cfg.T = 0.05;
  cfg.dt = 0.005;
  cfg.delta_floor = 0.5 * data.params.delta;
  auto r = run_picard(data, cfg);
  REQUIRE(r.report.converged);
  const auto& sw = r.report.sweeps;
  for (std::size_t m = 1; m < sw.size(); ++m) {
    MESSAGE("sweep " << m << " N = " << sw[m].N_distance);
    CHECK(sw[m].N_distance < sw[m - 1].N_distance);
  }
  CHECK(r.report.ratio < 1.0);
  CHECK(r.eta.eta.back().max_abs() < data.eta0.max_abs());
  for (const auto& s : sw) CHECK(s.min_J > cfg.delta_floor);
  MESSAGE("nonlinear residual " << r.report.nonlinear_residual << ", sweeps " << r.report.sweep_count);
  CHECK(r.report.nonlinear_residual < 10 * cfg.elliptic.tol);

  // One more sweep from the converged state barely moves it.
  PicardConfig step = cfg;
  step.mode = PicardMode::step;
  auto rs = run_picard(data, step);
  CHECK(rs.report.converged);
  CHECK((rs.eta.eta.back() - r.eta.eta.back()).max_abs() < 1e-3 * data.eta0.max_abs());
}

TEST_CASE("Picard: an over-long window trips a monitor") {
  auto g = make_grid(8, 9);
  auto data = relaxation_data(g, 0.02);
  PicardConfig cfg;
  cfg.T = 200.0;
  cfg.dt = 2.0;
  cfg.delta_floor = 0.5 * data.params.delta;
  cfg.closeness_cap = 0.5;
  CHECK_THROWS_AS(run_picard(data, cfg), MonitorError);
}

TEST_CASE("Picard config validation") {
  PicardConfig c;
  c.dt = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = PicardConfig{};
  c.tol_N = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
