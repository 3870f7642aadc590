#include "slabflow/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>

#include "slabflow/error.hpp"
#include "slabflow/io.hpp"
#include "slabflow/random_fields.hpp"

namespace slabflow {

namespace {

constexpr double kPi = std::numbers::pi;
namespace fs = std::filesystem;

std::string dump_name(const char* field, int n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05d.slf", field, n);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void write_state_dumps(const fs::path& dir, const FlowState& s, int n) {
  write_dump(dir / dump_name("u", n), make_dump(std::vector<SlabField>{s.u[0], s.u[1], s.u[2]}, s.t));
  write_dump(dir / dump_name("p", n), make_dump(std::vector<SlabField>{s.p}, s.t));
  write_dump(dir / dump_name("eta", n), make_dump(s.eta, s.t));
}

// Relative max error of the solver against a field pair built from its own operator.
double manufactured_error(const GeometryPack& pack, std::uint64_t seed) {
  const GridPtr& g = pack.grid();
  TrialRng rng(seed);
  const SlabVector u = random_clamped_vector(g, rng, 3);
  const SurfaceField q = random_surface(g, rng, 3);
  SlabField p(g);
  for (int k = 0; k < g->nz(); ++k) {
    SurfaceField layer = q;
    layer *= g->x3(k) + 0.5;
    p.set_layer(k, layer);
  }
  const StokesOperatorValue op = apply_stokes_operator(pack, u, p, 0.0);
  const StokesRHS rhs{op.momentum, op.divergence, op.traction};
  const StokesSolution sol = solve_a_stokes(pack, rhs);
  const double scale = std::max(max_abs(u), p.max_abs());
  return std::max(max_abs(sol.u - u), (sol.p - p).max_abs()) / scale;
}

template <class F>
double median_seconds(int repeats, F&& fn) {
  std::vector<double> t;
  for (int r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

std::string grid_label(const GridSpec& g) {
  std::ostringstream s;
  s << g.N1 << "x" << g.N2 << "x" << g.Nz;
  return s.str();
}

}  // namespace

int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const fs::path dir = cfg.output.dir;
  std::unique_ptr<OutputLock> lock;
  try {
    lock = std::make_unique<OutputLock>(dir);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }

  const auto grid = Grid::create(cfg.grid);
  const BottomProfile bottom = make_bottom(cfg, grid);
  const SurfaceField eta0 = make_eta0(cfg, grid);
  InitialData data;
  try {
    const ExtensionParams params = make_extension(cfg, eta0, bottom);
    data = build_initial_data(make_u0(cfg, grid), eta0, bottom, params);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    write_text(dir / "summary.json", summary_json(cfg, "config_error", e.what(), nullptr, nullptr));
    return kExitFailure;
  }
  out << "epsilon = " << data.params.epsilon << ", delta = " << data.params.delta
      << ", compatibility residual = " << data.compat_residual << '\n';

  PicardResult result;
  try {
    result = run_picard(data, make_picard_config(cfg, data.params));
  } catch (const MonitorError& e) {
    err << "monitor: " << e.what() << '\n';
    write_text(dir / "summary.json", summary_json(cfg, "monitor", e.what(), nullptr, nullptr));
    return kExitMonitor;
  } catch (const SolverError& e) {
    err << "solver failure: " << e.what() << '\n';
    write_text(dir / "summary.json", summary_json(cfg, "solver", e.what(), nullptr, nullptr));
    return kExitSolver;
  }

  const auto rows = diagnostics_rows(result, data);
  {
    std::ofstream csv(dir / "diagnostics.csv", std::ios::trunc);
    write_csv(csv, rows);
  }
  const auto& states = result.traj.states;
  for (std::size_t n = 0; n < states.size(); ++n) {
    const bool last = n + 1 == states.size();
    const bool cadence = cfg.output.cadence > 0 && n % static_cast<std::size_t>(cfg.output.cadence) == 0;
    if (cadence || last) write_state_dumps(dir, states[n], static_cast<int>(n));
  }

  const DiagnosticsReport diag = diagnose(result, data, 10, cfg.output.seed);
  const bool ok = result.report.converged;
  const std::string message = ok ? "converged" : "Picard iteration did not converge within max_picard";
  write_text(dir / "summary.json", summary_json(cfg, ok ? "converged" : "not_converged", message, &result.report, &diag));

  out << "sweeps = " << result.report.sweep_count << ", ratio = " << result.report.ratio
      << ", nonlinear residual = " << result.report.nonlinear_residual
      << ", energy residual = " << diag.energy_residual << ", min J = " << diag.min_J << '\n';
  if (!ok) {
    err << "solver failure: " << message << '\n';
    return kExitSolver;
  }
  return kExitOk;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  LemmaSuiteOptions opts;
  opts.grid = cfg.grid;
  opts.samples = cfg.verify.samples;
  opts.seed = cfg.output.seed;
  opts.corrupt_geometry = cfg.verify.corrupt_geometry;
  ExtensionParams params;
  if (cfg.extension.epsilon) params.epsilon = *cfg.extension.epsilon;

  LemmaChecks checks;
  try {
    checks = run_lemma_suite(params, opts);
    const auto grid = Grid::create(cfg.grid);
    checks["manufactured.flat_stokes"] = {manufactured_error(flat_geometry(grid), cfg.output.seed), 1e-8, "identity", false};
    const double L1 = cfg.grid.L1;
    const auto eta = SurfaceField::from_function(grid, [L1](double x1, double) { return 0.02 * std::cos(2 * kPi * x1 / L1); });
    const auto pack = build_geometry(eta, std::nullopt, BottomProfile::flat(grid), params);
    checks["manufactured.a_stokes"] = {manufactured_error(pack, cfg.output.seed), 1e-7, "identity", false};
    for (auto name : {"manufactured.flat_stokes", "manufactured.a_stokes"}) {
      auto& c = checks[name];
      c.pass = std::isfinite(c.value) && c.value <= c.threshold;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }

  char line[160];
  std::snprintf(line, sizeof line, "%-34s %-9s %13s %13s  %s\n", "check", "kind", "value", "threshold", "result");
  out << line;
  for (const auto& [name, c] : checks) {
    std::snprintf(line, sizeof line, "%-34s %-9s %13.4e %13.4e  %s\n", name.c_str(), c.kind.c_str(), c.value,
                  c.threshold, c.pass ? "PASS" : "FAIL");
    out << line;
  }

  out << "\nepsilon scaling of sup |d3 P^eps f|, f = cos(2 pi x1 / L1)\n";
  const auto pts = epsilon_scaling_study(Grid::create(cfg.grid), opts.slope_eps_min, opts.slope_eps_max, opts.slope_points);
  for (const auto& p : pts) {
    std::snprintf(line, sizeof line, "  eps = %10.4e   sup = %12.6e\n", p.epsilon, p.sup_dz);
    out << line;
  }
  std::snprintf(line, sizeof line, "  fitted slope = %.6f\n", scaling_slope(pts));
  out << line;

  const bool ok = identities_pass(checks);
  out << (ok ? "identity checks: PASS\n" : "identity checks: FAIL\n");
  return ok ? kExitOk : kExitFailure;
}

int cmd_bench(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  out << "operation,grid,wall_time_s,throughput\n";
  try {
    for (const GridSpec& spec : cfg.bench.grids) {
      GridSpec s = spec;
      s.L1 = cfg.grid.L1;
      s.L2 = cfg.grid.L2;
      s.b0 = cfg.grid.b0;
      const auto grid = Grid::create(s);
      const std::string label = grid_label(s);
      TrialRng rng(cfg.output.seed);

      StokesRHS rhs = StokesRHS::zero(grid);
      rhs.F = random_clamped_vector(grid, rng, 3);
      const FlatStokesSolver flat(grid, 0.0);
      const double t_flat = median_seconds(cfg.bench.repeats, [&] { (void)flat.solve(rhs); });
      char row[160];
      std::snprintf(row, sizeof row, "flat_solve,%s,%.6e,%.6e\n", label.c_str(), t_flat,
                    static_cast<double>(grid->spectral_layer_size()) / t_flat);
      out << row;

      const double L1 = s.L1;
      const auto eta = SurfaceField::from_function(grid, [L1](double x1, double) { return 0.02 * std::cos(2 * kPi * x1 / L1); });
      const auto pack = build_geometry(eta, std::nullopt, BottomProfile::flat(grid), ExtensionParams{});
      int iters = 1;
      const double t_a = median_seconds(cfg.bench.repeats, [&] { iters = std::max(1, solve_a_stokes(pack, rhs).iterations); });
      std::snprintf(row, sizeof row, "a_stokes_sweep,%s,%.6e,%.6e\n", label.c_str(), t_a / iters, iters / t_a);
      out << row;

      const SurfaceVector vel{0.2 * random_surface(grid, rng, 3), 0.2 * random_surface(grid, rng, 3),
                              0.05 * random_surface(grid, rng, 3)};
      const TimeGrid tg = TimeGrid::over(0.01, 0.001);
      const double t_tr = median_seconds(cfg.bench.repeats, [&] {
        (void)solve_transport(eta, [&](double) { return vel; }, tg);
      });
      std::snprintf(row, sizeof row, "transport_step,%s,%.6e,%.6e\n", label.c_str(), t_tr / tg.steps, tg.steps / t_tr);
      out << row;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_extend(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const fs::path dir = cfg.output.dir;
    OutputLock lock(dir);
    const auto grid = Grid::create(cfg.grid);
    const BottomProfile bottom = make_bottom(cfg, grid);
    const SurfaceField eta0 = make_eta0(cfg, grid);
    const ExtensionParams params = make_extension(cfg, eta0, bottom);
    const SlabField lift = poisson_extend(eta0, params.epsilon);
    const SlabField dz = poisson_extend_dz(eta0, params.epsilon);
    write_dump(dir / "extension.slf", make_dump(std::vector<SlabField>{lift, dz}, 0.0));
    out << "epsilon = " << params.epsilon << ", delta = " << params.delta << ", max |P eta0| = " << lift.max_abs()
        << ", max |d3 P eta0| = " << dz.max_abs() << ", min J = " << min_jacobian(eta0, bottom, params.epsilon)
        << '\n'
        << "wrote " << (dir / "extension.slf").string() << '\n';
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace slabflow
