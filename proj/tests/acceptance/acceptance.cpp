// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "slabflow/commands.hpp"
#include "slabflow/diagnostics.hpp"
#include "slabflow/error.hpp"
#include "slabflow/random_fields.hpp"

using namespace slabflow;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

GridPtr make_grid(int n, int nz, double b0 = 1.0) {
  GridSpec s;
  s.N1 = n;
  s.N2 = n;
  s.Nz = nz;
  s.b0 = b0;
  return Grid::create(s);
}

SurfaceField cosine(const GridPtr& g, double amp) {
  return SurfaceField::from_function(g, [amp](double x1, double) { return amp * std::cos(2 * pi * x1); });
}

// ---------------------------------------------------------------------------
// 1. exact identities

void identities(Outcome& o) {
  Stopwatch clock;
  auto g = make_grid(32, 17);
  auto eta = SurfaceField::from_function(g, [](double x1, double x2) {
    return 0.05 * std::cos(2 * pi * x1) + 0.02 * std::sin(2 * pi * (x1 + 2 * x2));
  });
  auto rate = SurfaceField::from_function(g, [](double x1, double x2) {
    return 0.03 * std::sin(2 * pi * x1) * std::cos(2 * pi * x2);
  });
  const auto bottom = BottomProfile::single_mode(g, 0.1, 1);
  const auto pack = build_geometry(eta, rate, bottom, ExtensionParams{});
  const auto rep = verify_identities(pack);
  const double t = clock.seconds();
  o.detail << "piola " << rep.piola << ", JAe3=N " << rep.jae3_top << ", bottom " << rep.jae3_bottom
           << ", R^T N = -d_t N " << rep.r_identity.value_or(NAN) << ", " << t << " s ";
  o.require(rep.piola <= 1e-8, "Piola identity");
  o.require(rep.jae3_top <= 1e-8, "J A e3 = N");
  o.require(rep.jae3_bottom <= 1e-8, "bottom identity");
  o.require(rep.r_identity && *rep.r_identity <= 1e-8, "R^T N identity");
  o.require(t < 5.0, "runtime < 5 s");
}

// ---------------------------------------------------------------------------
// 2. Poisson-extension contract

void extension(Outcome& o) {
  for (double b0 : {1.0, 0.5}) {
    LemmaSuiteOptions opts;
    opts.grid.b0 = b0;
    const auto checks = run_lemma_suite(ExtensionParams{}, opts);
    const auto& trace = checks.at("extension.trace");
    const auto& h1 = checks.at("extension.bound_h1");
    const auto& h2 = checks.at("extension.bound_h2");
    const auto& slope = checks.at("extension.eps_slope");
    o.detail << "b0 = " << b0 << ": trace " << trace.value << ", slack H1 " << h1.value << ", slack H2 "
             << h2.value << ", slope " << slope.value << "; ";
    o.require(trace.value <= 1e-12, "trace equality");
    o.require(h1.value <= 1.0 && h2.value <= 1.0, "slack <= 1 with C = pi (1 + b0)");
    o.require(std::abs(slope.value - 1.0) <= 0.05, "eps slope 1.00 +- 0.05");
  }
}

// ---------------------------------------------------------------------------
// 3. manufactured Stokes solutions
//
// Exact solution in physical coordinates y, pulled back through the
// flattening map: v = curl(0, psi, 0) + (0, (y3+1)^2 sin 2pi(y1+y2), 0) with
// psi = (y3+1)^2 e^{y3} cos 2pi y1, q = e^{y3} cos 2pi y1 + 1/2.

struct Physical {
  static double v(int c, double y1, double y2, double y3) {
    const double e = std::exp(y3), z = y3 + 1;
    switch (c) {
      case 0: return -(y3 + 3) * z * e * std::cos(2 * pi * y1);
      case 1: return z * z * std::sin(2 * pi * (y1 + y2));
      default: return -2 * pi * z * z * e * std::sin(2 * pi * y1);
    }
  }
  static double q(double y1, double, double y3) { return std::exp(y3) * std::cos(2 * pi * y1) + 0.5; }
  // -lap v + grad q
  static double F(int c, double y1, double y2, double y3) {
    const double e = std::exp(y3), z = y3 + 1, s = std::sin(2 * pi * y1), co = std::cos(2 * pi * y1);
    switch (c) {
      case 0: return (-4 * pi * pi * z * (y3 + 3) * co + (6 * y3 + z * z + 12) * co - 2 * pi * s) * e;
      case 1: return (8 * pi * pi * z * z - 2) * std::sin(2 * pi * (y1 + y2));
      default: return (-8 * pi * pi * pi * z * z * s + 2 * pi * (4 * y3 + z * z + 6) * s + co) * e;
    }
  }
  static double G(double y1, double y2, double y3) {
    return 2 * pi * (y3 + 1) * (y3 + 1) * std::cos(2 * pi * (y1 + y2));
  }
  // q I - D v
  static double S(int i, int j, double y1, double y2, double y3) {
    if (i > j) std::swap(i, j);
    const double e = std::exp(y3), z = y3 + 1, s = std::sin(2 * pi * y1), co = std::cos(2 * pi * y1);
    const double s12 = std::sin(2 * pi * (y1 + y2)), c12 = std::cos(2 * pi * (y1 + y2));
    if (i == 0 && j == 0) return -4 * pi * z * z * e * s - 8 * pi * z * e * s + e * co + 0.5;
    if (i == 0 && j == 1) return -2 * pi * z * z * c12;
    if (i == 0 && j == 2) return (4 * y3 + z * z + 4 * pi * pi * z * z + 6) * e * co;
    if (i == 1 && j == 1) return -4 * pi * z * z * c12 + e * co + 0.5;
    if (i == 1 && j == 2) return -2 * z * s12;
    return 4 * pi * z * z * e * s + 8 * pi * z * e * s + e * co + 0.5;
  }
};

struct StokesCase {
  double error = 0.0;
  int iterations = 0;
};

StokesCase manufactured_stokes(int n, int nz, double amp) {
  auto g = make_grid(n, nz);
  const auto eta = cosine(g, amp);
  const auto bottom = BottomProfile::flat(g);
  const auto pack = build_geometry(eta, std::nullopt, bottom, choose_epsilon(eta, bottom));

  // y3 = x3 + etabar (1 + x3) for b = b0 = 1.
  auto pulled = [&](auto&& f) {
    SlabField out(g);
    for (int k = 0; k < g->nz(); ++k)
      for (int i = 0; i < g->n1(); ++i)
        for (int j = 0; j < g->n2(); ++j) {
          const double x3 = g->x3(k);
          out(k, i, j) = f(g->x1(i), g->x2(j), x3 + pack.etabar(k, i, j) * (1 + x3));
        }
    return out;
  };
  SlabVector u, F;
  for (int c = 0; c < 3; ++c) {
    u[c] = pulled([c](double a, double b, double y) { return Physical::v(c, a, b, y); });
    F[c] = pulled([c](double a, double b, double y) { return Physical::F(c, a, b, y); });
  }
  const SlabField p = pulled(Physical::q);
  StokesRHS rhs = StokesRHS::zero(g);
  rhs.F = F;
  rhs.G = pulled(Physical::G);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < g->n1(); ++i)
      for (int j = 0; j < g->n2(); ++j) {
        const double y1 = g->x1(i), y2 = g->x2(j), y3 = eta(i, j);
        double h = 0.0;
        for (int d = 0; d < 3; ++d) h += Physical::S(c, d, y1, y2, y3) * pack.Ntop[d](i, j);
        rhs.H[c](i, j) = h;
      }

  const auto sol = solve_a_stokes(pack, rhs);
  const double eu = sobolev_norm_slab(sol.u - u, 1), ep = sobolev_norm_slab(sol.p - p, 0);
  const double nu = sobolev_norm_slab(u, 1), np = sobolev_norm_slab(p, 0);
  return {std::sqrt(eu * eu + ep * ep) / std::sqrt(nu * nu + np * np), sol.iterations};
}

void stokes(Outcome& o) {
  Stopwatch clock;
  for (double amp : {0.0, 0.02}) {
    const auto coarse = manufactured_stokes(8, 9, amp);
    const auto fine = manufactured_stokes(16, 17, amp);
    o.detail << "amplitude " << amp << ": 8x8x9 " << coarse.error << ", 16x16x17 " << fine.error << " ("
             << fine.iterations << " sweeps); ";
    o.require(fine.error <= 1e-7, "H1 x L2 error <= 1e-7 at 16x16x17");
    o.require(coarse.error >= 100 * fine.error, "error drop >= 100x on refinement");
  }
  const double t = clock.seconds();
  o.detail << t << " s ";
  o.require(t < 30.0, "runtime < 30 s");
}

// ---------------------------------------------------------------------------
// 4. transport

void transport(Outcome& o) {
  auto g = make_grid(32, 5);
  auto f0 = [](double x1, double x2) { return 0.1 * std::cos(2 * pi * x1) + 0.05 * std::sin(4 * pi * x1 + 2 * pi * x2); };
  const auto eta0 = SurfaceField::from_function(g, f0);
  const SurfaceVector shift{SurfaceField(g, 1.0), SurfaceField(g), SurfaceField(g)};
  const auto tr = solve_transport(eta0, [&](double) { return shift; }, TimeGrid::over(0.5, 5e-4));
  const auto exact = SurfaceField::from_function(g, [&](double x1, double x2) { return f0(x1 - 0.5, x2); });
  const double translation = (tr.eta.back() - exact).max_abs() / exact.max_abs();

  const SurfaceVector lift{SurfaceField(g), SurfaceField(g), SurfaceField(g, 0.3)};
  const auto tl = solve_transport(eta0, [&](double) { return lift; }, TimeGrid::over(0.5, 0.05));
  const auto lifted = eta0 + SurfaceField(g, 0.15);
  const double lift_err = (tl.eta.back() - lifted).max_abs() / lifted.max_abs();

  auto h = make_grid(16, 5);
  const auto e0 = SurfaceField::from_function(h, [](double x1, double x2) { return 0.1 * std::cos(2 * pi * x1) + 0.05 * std::sin(2 * pi * x2); });
  auto u = [&](double t) -> SurfaceVector {
    return {SurfaceField(h, 0.3 * std::cos(t)), SurfaceField(h, 0.2 * std::sin(2 * t)),
            SurfaceField::from_function(h, [t](double x1, double x2) { return 0.1 * std::cos(2 * pi * (x1 + x2)) * std::cos(t); })};
  };
  const auto ref = solve_transport(e0, u, TimeGrid::over(1.0, 1.0 / 640)).eta.back();
  const double ea = (solve_transport(e0, u, TimeGrid::over(1.0, 0.05)).eta.back() - ref).max_abs();
  const double eb = (solve_transport(e0, u, TimeGrid::over(1.0, 0.025)).eta.back() - ref).max_abs();
  const double ec = (solve_transport(e0, u, TimeGrid::over(1.0, 0.0125)).eta.back() - ref).max_abs();
  const double o1 = std::log2(ea / eb), o2 = std::log2(eb / ec);

  o.detail << "translation " << translation << ", lift " << lift_err << ", RK4 orders " << o1 << " " << o2 << " ";
  o.require(translation <= 1e-8, "translation");
  o.require(lift_err <= 1e-8, "uniform lift");
  o.require(std::abs(o1 - 4.0) <= 0.2 && std::abs(o2 - 4.0) <= 0.2, "order 4.0 +- 0.2");
}

// ---------------------------------------------------------------------------
// 5. linear Navier-Stokes stepper

SurfaceTrajectory flat_surface(const GridPtr& g, const TimeGrid& tg) {
  SurfaceTrajectory s;
  s.time = tg;
  s.eta.assign(tg.steps + 1, SurfaceField(g));
  s.deta_dt.assign(tg.steps + 1, SurfaceField(g));
  return s;
}

std::vector<Forcing> no_forcing(const GridPtr& g, const TimeGrid& tg) {
  return std::vector<Forcing>(tg.steps + 1, Forcing{zero_vector(g), zero_surface_vector(g)});
}

void linear_stepper(Outcome& o) {
  auto g = make_grid(8, 9);
  {
    const auto tg = TimeGrid::over(1.0, 0.01);
    LinearProblem pb{flat_surface(g, tg), BottomProfile::flat(g), ExtensionParams{}, zero_vector(g), SlabField(g), no_forcing(g, tg), 0.25};
    const auto traj = solve_linear_ns_window(pb);
    double worst = 0.0;
    for (const auto& s : traj.states) worst = std::max({worst, max_abs(s.u), s.p.max_abs()});
    o.detail << "zero data max " << worst << " over " << tg.steps << " steps; ";
    o.require(traj.states.size() == 101 && worst <= 1e-12, "zero data stays zero");
  }

  auto gs = make_grid(8, 17);
  auto shear = [&](double dt, bool& monotone) {
    const auto tg = TimeGrid::over(0.2, dt);
    SlabVector u0 = zero_vector(gs);
    u0[0] = SlabField::from_profile(gs, [](double z) { return std::cos(pi * z / 2); });
    const auto forcing = no_forcing(gs, tg);
    LinearProblem pb{flat_surface(gs, tg), BottomProfile::flat(gs), ExtensionParams{}, u0, SlabField(gs), forcing, 0.25};
    const auto traj = solve_linear_ns_window(pb);
    auto energy = [](const SlabVector& u) {
      return integrate(multiply(u[0], u[0]) + multiply(u[1], u[1]) + multiply(u[2], u[2]));
    };
    for (std::size_t n = 1; n < traj.states.size(); ++n)
      monotone = monotone && energy(traj.states[n].u) < energy(traj.states[n - 1].u);
    return energy_identity_residual(traj, forcing, pb.bottom, pb.params);
  };
  bool monotone = true;
  std::vector<ScalingPoint> energy_pts;
  for (double dt : {4e-3, 2e-3, 1e-3}) energy_pts.push_back({dt, shear(dt, monotone)});
  const double energy_order = scaling_slope(energy_pts);
  o.detail << "dissipation " << (monotone ? "monotone" : "NOT monotone") << "; energy residual "
           << energy_pts.back().sup_dz << " at dt = 1e-3, order " << energy_order << "; ";
  o.require(monotone, "flat dissipation monotone");
  o.require(energy_order >= 0.8 && energy_order <= 1.2, "energy residual order in [0.8, 1.2]");

  // u = e^{-t} U with U a cubic stream-function velocity, forced to match.
  auto q = [](double z) { return (z + 1) * (z + 1) * (1 + z / 2); };
  auto dq = [](double z) { return 2 * (z + 1) * (1 + z / 2) + 0.5 * (z + 1) * (z + 1); };
  const SlabVector U{SlabField::from_function(g, [dq](double x1, double, double z) { return -dq(z) * std::cos(2 * pi * x1); }),
                     SlabField(g),
                     SlabField::from_function(g, [q](double x1, double, double z) { return -2 * pi * q(z) * std::sin(2 * pi * x1); })};
  const SlabField P = SlabField::from_function(g, [](double x1, double, double z) { return std::cos(2 * pi * x1) * (z + 1) + 0.3; });
  const auto op = apply_stokes_operator(flat_geometry(g), U, P, 0.0);
  std::vector<double> errs;
  for (double dt : {0.05, 0.025, 0.0125}) {
    const auto tg = TimeGrid::over(0.5, dt);
    std::vector<Forcing> forcing;
    for (int n = 0; n <= tg.steps; ++n) {
      const double e = std::exp(-tg.time(n));
      forcing.push_back({e * (op.momentum - U), {e * op.traction[0], e * op.traction[1], e * op.traction[2]}});
    }
    LinearProblem pb{flat_surface(g, tg), BottomProfile::flat(g), ExtensionParams{}, U, P, forcing, 0.25};
    errs.push_back(max_abs(solve_linear_ns_window(pb).states.back().u - std::exp(-0.5) * U));
  }
  const double t1 = std::log2(errs[0] / errs[1]), t2 = std::log2(errs[1] / errs[2]);
  o.detail << "manufactured time orders " << t1 << " " << t2 << " ";
  o.require(std::abs(t1 - 1.0) <= 0.1 && std::abs(t2 - 1.0) <= 0.1, "time order 1.0 +- 0.1");
}

// ---------------------------------------------------------------------------
// 6. Picard scheme

void picard(Outcome& o) {
  {
    auto g = make_grid(8, 9);
    const auto data = build_initial_data(zero_vector(g), SurfaceField(g), BottomProfile::flat(g), ExtensionParams{});
    PicardConfig cfg;
    cfg.T = 1.0;
    cfg.dt = 0.01;
    const auto r = run_picard(data, cfg);
    double worst = 0.0;
    for (const auto& s : r.traj.states) worst = std::max({worst, max_abs(s.u), s.eta.max_abs()});
    o.detail << "equilibrium: " << r.report.sweep_count << " sweep, max " << worst << "; ";
    o.require(r.report.converged && r.report.sweep_count == 1 && worst == 0.0, "equilibrium fixed point in 1 sweep");
  }

  Stopwatch clock;
  auto g = make_grid(32, 17);
  const auto eta0 = cosine(g, 0.02);
  const auto bottom = BottomProfile::flat(g);
  const auto data = build_initial_data(zero_vector(g), eta0, bottom, choose_epsilon(eta0, bottom));
  PicardConfig cfg;
  cfg.T = 0.05;
  cfg.dt = 5e-3;
  cfg.delta_floor = 0.5 * data.params.delta;
  const auto r = run_picard(data, cfg);
  const double t = clock.seconds();

  bool decreasing = true;
  double min_J = INFINITY;
  o.detail << "relaxation N-distances";
  for (std::size_t m = 0; m < r.report.sweeps.size(); ++m) {
    o.detail << " " << r.report.sweeps[m].N_distance;
    min_J = std::min(min_J, r.report.sweeps[m].min_J);
    if (m > 0) decreasing = decreasing && r.report.sweeps[m].N_distance < r.report.sweeps[m - 1].N_distance;
  }
  o.detail << ", ratio " << r.report.ratio << ", min J " << min_J << " (delta/2 = " << cfg.delta_floor
           << "), nonlinear residual " << r.report.nonlinear_residual << ", " << t << " s ";
  o.require(r.report.converged, "converged");
  o.require(decreasing, "strictly decreasing N-distances");
  o.require(r.report.ratio < 1.0, "geometric ratio < 1");
  o.require(min_J > cfg.delta_floor, "min J > delta / 2");
  o.require(r.report.nonlinear_residual <= 10 * cfg.elliptic.tol, "nonlinear residual <= 10 x solver tol");
  o.require(t < 300.0, "runtime < 5 min");
}

// ---------------------------------------------------------------------------
// 7. monitor soundness

void monitors(Outcome& o) {
  auto g = make_grid(8, 9);
  const auto eta0 = cosine(g, 0.02);
  const auto bottom = BottomProfile::flat(g);
  const auto data = build_initial_data(zero_vector(g), eta0, bottom, choose_epsilon(eta0, bottom));
  PicardConfig cfg;
  cfg.T = 200.0;
  cfg.dt = 2.0;
  cfg.delta_floor = 0.5 * data.params.delta;
  try {
    run_picard(data, cfg);
    o.require(false, "over-long window must trip a monitor");
  } catch (const MonitorError& e) {
    const std::string msg = e.what();
    o.detail << "T = 200: " << msg << " ";
    o.require(msg.find("contraction failed") != std::string::npos || msg.find("boundedness monitor") != std::string::npos,
              "contraction-failure or boundedness exit path");
  }
}

// ---------------------------------------------------------------------------
// 8. determinism

void determinism(Outcome& o) {
  const fs::path root = fs::temp_directory_path() / ("slabflow_acceptance_" + std::to_string(::getpid()));
  std::string csv[2];
  for (int r = 0; r < 2; ++r) {
    RunConfig cfg = parse_config("grid.N1 = 16\ngrid.N2 = 16\ngrid.Nz = 17\ninitial.eta = 1 0 0.02, 1 1 0.005\n"
                                 "time.T = 0.05\ntime.dt = 0.005\noutput.seed = 7\n");
    cfg.output.dir = (root / ("run" + std::to_string(r))).string();
    std::ostringstream out, err;
    const int code = cmd_run(cfg, out, err);
    o.require(code == kExitOk, "run exit code 0 (" + err.str() + ")");
    std::ifstream in(fs::path(cfg.output.dir) / "diagnostics.csv", std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    csv[r] = s.str();
  }
  std::error_code ec;
  fs::remove_all(root, ec);
  o.detail << "CSV " << csv[0].size() << " bytes, identical = " << (csv[0] == csv[1] ? "yes" : "no") << " ";
  o.require(!csv[0].empty() && csv[0] == csv[1], "bitwise-identical diagnostics CSV");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    std::function<void(Outcome&)> run;
  };
  const Criterion criteria[] = {
      {1, "exact identities", identities},
      {2, "Poisson-extension contract", extension},
      {3, "flat and A-Stokes manufactured solutions", stokes},
      {4, "transport analytic cases", transport},
      {5, "linear NS stepper", linear_stepper},
      {6, "Picard scheme", picard},
      {7, "monitor soundness", monitors},
      {8, "determinism", determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "[exception: " << e.what() << "]";
    }
    std::printf("[%s] %d. %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.str().c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d of 8 criteria passed\n", 8 - failures);
  return failures == 0 ? 0 : 1;
}
