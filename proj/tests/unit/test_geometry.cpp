#include <cmath>
#include <numbers>

#include "doctest.h"
#include "slabflow/error.hpp"
#include "slabflow/geometry.hpp"
#include "slabflow/random_fields.hpp"

using namespace slabflow;
using std::numbers::pi;

namespace {

GridPtr make_grid(int n, int nz, double b0 = 1.0) {
  GridSpec s;
  s.N1 = n;
  s.N2 = n;
  s.Nz = nz;
  s.b0 = b0;
  return Grid::create(s);
}

SurfaceField cos_mode(const GridPtr& g, double a) {
  return SurfaceField::from_function(g, [a](double x1, double) { return a * std::cos(2 * pi * x1); });
}

ExtensionParams with_epsilon(double eps) {
  ExtensionParams p;
  p.epsilon = eps;
  return p;
}

double max_abs3(const SurfaceVector& a, const SurfaceVector& b) {
  return std::max({(a[0] - b[0]).max_abs(), (a[1] - b[1]).max_abs(), (a[2] - b[2]).max_abs()});
}

}  // namespace

TEST_CASE("poisson extension: constants, single modes, trace") {
  auto g = make_grid(16, 17);
  auto c = poisson_extend(SurfaceField(g, 0.7), 0.3);
  CHECK((c - SlabField(g, 0.7)).max_abs() < 1e-15);

  const double eps = 0.25;
  auto f = cos_mode(g, 1.0);
  auto ext = poisson_extend(f, eps);
  auto exact = SlabField::from_function(
      g, [eps](double x1, double, double z) { return std::exp(eps * z) * std::cos(2 * pi * x1); });
  CHECK((ext - exact).max_abs() < 1e-14);
  auto dz = poisson_extend_dz(f, eps);
  CHECK(dz.max_abs() == doctest::Approx(eps).epsilon(1e-14));
  CHECK(dz.top().max_abs() == doctest::Approx(eps).epsilon(1e-14));
  // The closed-form multiplier agrees with Chebyshev differentiation.
  CHECK((vertical_derivative(ext) - dz).max_abs() < 1e-12);

  TrialRng rng(1);
  auto r = random_surface(g, rng, 5, true);
  for (double e : {1e-3, 0.1, 1.0}) CHECK((poisson_extend(r, e).top() - r).max_abs() < 1e-12);
  CHECK_THROWS_AS(poisson_extend(r, 0.0), ConfigError);
  CHECK_THROWS_AS(poisson_extend(r, 1.5), ConfigError);
}

TEST_CASE("poisson extension: vertical derivative scales with epsilon") {
  auto g = make_grid(16, 17);
  TrialRng rng(2);
  auto f = random_surface(g, rng, 4);
  double prev = 1e300;
  for (double e : {1.0, 0.5, 0.1, 0.05, 0.01, 0.001}) {
    const double s = poisson_extend_dz(f, e).max_abs();
    CHECK(s < prev);
    prev = s;
  }
}

TEST_CASE("poisson extension: H^1 bound with explicit constants") {
  auto g = make_grid(32, 17);
  TrialRng rng(3);
  const double b0 = 1.0;
  for (int trial = 0; trial < 5; ++trial) {
    auto f = random_surface(g, rng, 8);
    const double eps = 0.1;
    const double lhs = std::pow(sobolev_norm_slab(poisson_extend(f, eps), 1), 2);
    const double rhs = pi / eps * std::pow(homogeneous_norm_surface(f, 0.5), 2) +
                       pi * b0 / eps * std::pow(sobolev_norm_surface(f, 0.0), 2);
    CHECK(lhs <= rhs);
    for (int q : {1, 2}) {
      const double l = std::pow(sobolev_norm_slab(poisson_extend(f, eps), q), 2);
      const double r = pi * (1 + b0) / eps * std::pow(sobolev_norm_surface(f, q - 0.5), 2);
      CHECK(l <= r);
    }
  }
}

TEST_CASE("choose_epsilon") {
  auto g = make_grid(32, 17);
  auto flat = BottomProfile::flat(g);
  auto p = choose_epsilon(SurfaceField(g), flat);
  CHECK(p.delta == doctest::Approx(0.5));
  CHECK(p.epsilon == 1.0);
  auto pack = build_geometry(SurfaceField(g), std::nullopt, flat, p);
  CHECK(pack.min_J() == doctest::Approx(1.0).epsilon(1e-14));

  // Closed form: delta = 0.45, ||eta0||_{5/2}^2 = 0.005 (1 + 4 pi^2)^{5/2}.
  auto eta0 = cos_mode(g, 0.1);
  auto q = choose_epsilon(eta0, flat, 1.0);
  const double expected = std::min(1.0, 0.2025 / (0.02 * std::pow(1 + 4 * pi * pi, 2.5)));
  CHECK(q.delta == doctest::Approx(0.45).epsilon(1e-13));
  CHECK(q.epsilon == doctest::Approx(expected).epsilon(1e-12));
  CHECK(min_jacobian(eta0, flat, q.epsilon) > q.delta);

  auto touching = cos_mode(g, 1.0);
  CHECK_THROWS_WITH_AS(choose_epsilon(touching, flat), doctest::Contains("surface touches bottom"),
                       SolverError);
  CHECK_THROWS_AS(choose_epsilon(eta0, flat, 0.0), ConfigError);
}

TEST_CASE("build_geometry: flat and single-mode coefficients") {
  auto g = make_grid(16, 17);
  auto flat = BottomProfile::flat(g);
  auto pack = build_geometry(SurfaceField(g), SurfaceField(g), flat, with_epsilon(1.0));
  CHECK(pack.A.max_abs() == 0.0);
  CHECK(pack.B.max_abs() == 0.0);
  CHECK((pack.J - SlabField(g, 1.0)).max_abs() == 0.0);
  CHECK((pack.K - SlabField(g, 1.0)).max_abs() == 0.0);
  const Mat3 a = pack.amat(3, 2, 1);
  const Mat3 m = pack.mmat(3, 2, 1);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      CHECK(a[r][c] == (r == c ? 1.0 : 0.0));
      CHECK(m[r][c] == (r == c ? 1.0 : 0.0));
    }
  CHECK(max_abs3(pack.Ntop, {SurfaceField(g), SurfaceField(g), SurfaceField(g, 1.0)}) == 0.0);

  const double amp = 0.05;
  const double eps = 0.2;
  auto curved = build_geometry(cos_mode(g, amp), std::nullopt, flat, with_epsilon(eps));
  auto jtop = SurfaceField::from_function(
      g, [&](double x1, double) { return 1 + amp * (1.0 + eps) * std::cos(2 * pi * x1); });
  CHECK((curved.J.top() - jtop).max_abs() < 1e-14);
  CHECK((multiply(curved.K, curved.J) - SlabField(g, 1.0)).max_abs() < 1e-10);
  const Mat3 mi = curved.mmat_inverse(4, 3, 0);
  const Mat3 mm = curved.mmat(4, 3, 0);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      double s = 0;
      for (int q = 0; q < 3; ++q) s += mm[r][q] * mi[q][c];
      CHECK(s == doctest::Approx(r == c ? 1.0 : 0.0).epsilon(1e-14));
    }

  CHECK_THROWS_WITH_AS(build_geometry(cos_mode(g, 0.8), std::nullopt, flat, with_epsilon(1.0)),
                       doctest::Contains("degenerate flattening map"), SolverError);
}

TEST_CASE("A-operators reduce to Euclidean ones on flat geometry") {
  auto g = make_grid(8, 9);
  auto flat = build_geometry(SurfaceField(g), std::nullopt, BottomProfile::flat(g), with_epsilon(1.0));
  SlabVector u = zero_vector(g);
  u[2] = SlabField::from_profile(g, [](double z) { return z + 1.0; });
  CHECK((div_A(flat, u) - SlabField(g, 1.0)).max_abs() < 1e-13);

  auto s = stress_A(flat, SlabField(g, 1.0), zero_vector(g));
  auto t = surface_traction(s, flat.Ntop);
  CHECK(max_abs3(t, {SurfaceField(g), SurfaceField(g), SurfaceField(g, 1.0)}) == 0.0);
}

TEST_CASE("stress divergence identity on div_A-free fields") {
  auto g = make_grid(32, 17);
  auto pack = build_geometry(cos_mode(g, 0.05), std::nullopt, BottomProfile::flat(g), with_epsilon(0.5));
  TrialRng rng(9);
  // w = curl(psi) is discretely divergence free; M maps it to a div_A-free field.
  SlabVector psi = {random_slab(g, rng, 4), random_slab(g, rng, 4), random_slab(g, rng, 4)};
  auto d = [](const SlabField& f, int axis) {
    return axis == 3 ? vertical_derivative(f) : horizontal_derivative(f, axis);
  };
  SlabVector w = {d(psi[2], 2) - d(psi[1], 3), d(psi[0], 3) - d(psi[2], 1), d(psi[1], 1) - d(psi[0], 2)};
  CHECK((horizontal_derivative(w[0], 1) + horizontal_derivative(w[1], 2) + vertical_derivative(w[2])).max_abs() <
        1e-10 * max_abs(w));
  SlabVector u = apply_M(pack, w);
  CHECK(div_A(pack, u).max_abs() < 1e-8 * max_abs(w));

  SlabField p = random_slab(g, rng, 4);
  SlabVector lhs = div_A(pack, stress_A(pack, p, u));
  SlabVector rhs = grad_A(pack, p) - lap_A(pack, u);
  const double scale = std::max(max_abs(lhs), max_abs(rhs));
  CHECK(max_abs(lhs - rhs) < 1e-8 * scale);
}

TEST_CASE("tangent projection") {
  auto g = make_grid(8, 5);
  SurfaceVector v = {SurfaceField(g, 1.0), SurfaceField(g, 2.0), SurfaceField(g, 3.0)};
  auto pv = project_tangent(v, SurfaceField(g));
  CHECK(max_abs3(pv, {SurfaceField(g, 1.0), SurfaceField(g, 2.0), SurfaceField(g)}) == 0.0);

  TrialRng rng(4);
  auto eta0 = random_surface(g, rng, 2);
  CHECK(max_abs(project_tangent(surface_normal(eta0), eta0)) < 1e-15);
  SurfaceVector r = {random_surface(g, rng, 3, true), random_surface(g, rng, 3, true),
                     random_surface(g, rng, 3, true)};
  auto once = project_tangent(r, eta0);
  CHECK(max_abs3(project_tangent(once, eta0), once) < 1e-12);
}

TEST_CASE("exact identities") {
  auto g8 = make_grid(8, 9);
  auto flat = build_geometry(SurfaceField(g8), SurfaceField(g8), BottomProfile::flat(g8), with_epsilon(1.0));
  auto fr = verify_identities(flat);
  CHECK(fr.piola < 1e-12);
  CHECK(fr.jae3_top == 0.0);
  CHECK(fr.jae3_bottom == 0.0);
  REQUIRE(fr.r_identity.has_value());
  CHECK(*fr.r_identity == 0.0);

  auto g = make_grid(32, 17);
  const double t = 0.3;
  auto eta = cos_mode(g, 0.05 * std::cos(t));
  auto eta_t = cos_mode(g, -0.05 * std::sin(t));
  auto flatb = BottomProfile::flat(g);
  auto params = choose_epsilon(cos_mode(g, 0.05), flatb);
  auto pack = build_geometry(eta, eta_t, flatb, params);
  auto rep = verify_identities(pack);
  CHECK(rep.piola < 1e-8);
  CHECK(rep.jae3_top < 1e-14);
  CHECK(rep.jae3_bottom < 1e-14);
  REQUIRE(rep.r_identity.has_value());
  CHECK(*rep.r_identity < 1e-8);

  auto wavy = BottomProfile::single_mode(g, 0.1, 2);
  auto pw = build_geometry(eta, eta_t, wavy, with_epsilon(0.5));
  auto rw = verify_identities(pw);
  CHECK(rw.piola < 1e-8);
  CHECK(rw.jae3_bottom < 1e-12);
  CHECK(*rw.r_identity < 1e-8);
}
