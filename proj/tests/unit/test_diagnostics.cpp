#include <cmath>
#include <numbers>

#include "doctest.h"
#include "slabflow/diagnostics.hpp"
#include "slabflow/error.hpp"

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

SurfaceTrajectory flat_surface(const GridPtr& g, const TimeGrid& tg) {
  SurfaceTrajectory s;
  s.time = tg;
  for (int n = 0; n <= tg.steps; ++n) {
    s.eta.emplace_back(g);
    s.deta_dt.emplace_back(g);
  }
  return s;
}

std::vector<Forcing> zero_forcing(const GridPtr& g, const TimeGrid& tg) {
  return std::vector<Forcing>(tg.steps + 1, Forcing{zero_vector(g), zero_surface_vector(g)});
}

double shear_residual(const GridPtr& g, double dt) {
  const auto tg = TimeGrid::over(0.2, dt);
  SlabVector u0 = zero_vector(g);
  u0[0] = SlabField::from_profile(g, [](double z) { return std::cos(pi * z / 2); });
  const auto forcing = zero_forcing(g, tg);
  LinearProblem pb{flat_surface(g, tg), BottomProfile::flat(g), ExtensionParams{}, u0, SlabField(g), forcing, 0.25};
  return energy_identity_residual(solve_linear_ns_window(pb), forcing, pb.bottom, pb.params);
}

// u = e^{-t} ((x3 + 1)^2, 0, 0), p = 0 on the flat unit slab.
double manufactured_residual(const GridPtr& g, double dt) {
  const auto tg = TimeGrid::over(0.4, dt);
  SlabVector U = zero_vector(g);
  U[0] = SlabField::from_profile(g, [](double z) { return (z + 1) * (z + 1); });
  std::vector<Forcing> forcing;
  for (int n = 0; n <= tg.steps; ++n) {
    const double e = std::exp(-tg.time(n));
    SlabVector F = zero_vector(g);
    F[0] = SlabField::from_profile(g, [e](double z) { return -e * (2 + (z + 1) * (z + 1)); });
    SurfaceVector H = zero_surface_vector(g);
    H[0] = SurfaceField(g, -2 * e);
    forcing.push_back({F, H});
  }
  LinearProblem pb{flat_surface(g, tg), BottomProfile::flat(g), ExtensionParams{}, U, SlabField(g), forcing, 0.25};
  return energy_identity_residual(solve_linear_ns_window(pb), forcing, pb.bottom, pb.params);
}

double fitted_order(const std::vector<double>& dts, const std::vector<double>& vals) {
  std::vector<ScalingPoint> pts;
  for (std::size_t i = 0; i < dts.size(); ++i) pts.push_back({dts[i], vals[i]});
  return scaling_slope(pts);
}

}  // namespace

TEST_CASE("energy identity: zero trajectory") {
  auto g = make_grid(8, 9);
  const auto tg = TimeGrid::over(0.1, 0.01);
  const auto forcing = zero_forcing(g, tg);
  LinearProblem pb{flat_surface(g, tg), BottomProfile::flat(g), ExtensionParams{}, zero_vector(g), SlabField(g), forcing, 0.25};
  CHECK(energy_identity_residual(solve_linear_ns_window(pb), forcing, pb.bottom, pb.params) == 0.0);
}

TEST_CASE("energy identity: decaying shear matches the backward-Euler defect") {
  auto g = make_grid(8, 17);
  const double lambda = pi * pi / 4;
  std::vector<double> dts{4e-3, 2e-3, 1e-3}, res;
  for (double dt : dts) {
    res.push_back(shear_residual(g, dt));
    // 1/2 sum |u_{n+1} - u_n|^2 over 1/2 |u0|^2 with u_n = a^n u0.
    const double a = 1.0 / (1.0 + lambda * dt);
    const int steps = static_cast<int>(std::lround(0.2 / dt));
    const double expected = (1 - a) * (1 - a) * (1 - std::pow(a, 2 * steps)) / (1 - a * a);
    CHECK(res.back() == doctest::Approx(expected).epsilon(1e-6));
  }
  CHECK(res.back() < 1e-3);
  const double order = fitted_order(dts, res);
  MESSAGE("energy residual order " << order);
  CHECK(order >= 0.8);
  CHECK(order <= 1.2);
}

TEST_CASE("energy identity: forced manufactured trajectory is first order") {
  auto g = make_grid(8, 9);
  std::vector<double> dts{0.02, 0.01, 0.005}, res;
  for (double dt : dts) res.push_back(manufactured_residual(g, dt));
  const double order = fitted_order(dts, res);
  MESSAGE("manufactured energy residual " << res.back() << ", order " << order);
  CHECK(order >= 0.8);
  CHECK(order <= 1.2);
}

TEST_CASE("energy identity: input validation") {
  auto g = make_grid(8, 9);
  const auto tg = TimeGrid::over(0.02, 0.01);
  LinearProblem pb{flat_surface(g, tg), BottomProfile::flat(g), ExtensionParams{}, zero_vector(g), SlabField(g), zero_forcing(g, tg), 0.25};
  const auto traj = solve_linear_ns_window(pb);
  CHECK_THROWS_AS(energy_identity_residual(traj, {}, pb.bottom, pb.params), ConfigError);
}

TEST_CASE("Korn ratio: explicit clamped shear") {
  auto g = make_grid(8, 9);
  SlabVector u = zero_vector(g);
  u[0] = SlabField::from_profile(g, [](double z) { return z + 1; });
  // |D u|^2 = 2, ||u||_1^2 = 1/3 + 1.
  CHECK(korn_ratio(flat_geometry(g), u) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK_THROWS_AS(korn_ratio(flat_geometry(g), zero_vector(g)), ConfigError);
}

TEST_CASE("norm equivalence ratios") {
  auto g = make_grid(16, 17);
  const auto flat = norm_equivalence_ratios(flat_geometry(g), 16, 5);
  MESSAGE("flat ratios " << flat.first << " " << flat.second);
  CHECK(flat.first > 0.0);
  CHECK(flat.first <= flat.second);
  CHECK(std::isfinite(flat.second));
  CHECK_THROWS_AS(norm_equivalence_ratios(flat_geometry(g), 9), ConfigError);

  double prev = flat.first;
  for (double amp : {0.1, 0.2, 0.3}) {
    const auto eta = SurfaceField::from_function(g, [amp](double x1, double) { return amp * std::cos(2 * pi * x1); });
    const auto pack = build_geometry(eta, std::nullopt, BottomProfile::flat(g), ExtensionParams{});
    const auto r = norm_equivalence_ratios(pack, 16, 5);
    MESSAGE("amplitude " << amp << " ratios " << r.first << " " << r.second);
    CHECK(r.first > 0.0);
    CHECK(r.first < prev);
    prev = r.first;
  }
}

TEST_CASE("epsilon scaling of the vertical derivative") {
  auto g = make_grid(16, 17);
  const auto pts = epsilon_scaling_study(g, 1e-3, 1e-1, 5);
  REQUIRE(pts.size() == 5);
  for (const auto& p : pts) CHECK(p.sup_dz == doctest::Approx(p.epsilon).epsilon(1e-10));
  CHECK(scaling_slope(pts) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK_THROWS_AS(epsilon_scaling_study(g, 0.1, 0.01, 5), ConfigError);
}

TEST_CASE("lemma suite on curved geometry") {
  LemmaSuiteOptions opts;
  const auto checks = run_lemma_suite(ExtensionParams{}, opts);
  for (const auto& [name, c] : checks) {
    MESSAGE(name << " [" << c.kind << "] " << c.value << " / " << c.threshold);
    CHECK_MESSAGE(c.pass, name);
  }
  CHECK(checks.count("identity.piola") == 1);
  CHECK(checks.count("identity.piola@16x16x17") == 1);
  CHECK(checks.at("extension.bound_h2").value <= 1.0);
  CHECK(checks.at("identity.jae3_top").value < 1e-13);
  CHECK(all_pass(checks));
}

TEST_CASE("lemma suite on flat geometry and negative control") {
  LemmaSuiteOptions opts;
  opts.grid.N1 = opts.grid.N2 = 16;
  opts.amplitude = 0.0;
  opts.samples = 4;
  const auto flat = run_lemma_suite(ExtensionParams{}, opts);
  CHECK(all_pass(flat));
  for (const auto& [name, c] : flat)
    if (c.kind == "identity") CHECK_MESSAGE(c.value <= 1e-10, name);

  opts.amplitude = 0.05;
  opts.corrupt_geometry = 1e-3;
  const auto bad = run_lemma_suite(ExtensionParams{}, opts);
  CHECK(!identities_pass(bad));
  CHECK(!bad.at("identity.piola").pass);
}
