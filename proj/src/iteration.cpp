#include "slabflow/iteration.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "slabflow/error.hpp"

namespace slabflow {

namespace {

double sq(double x) { return x * x; }

double sup(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  return m;
}

double trapezoid(const std::vector<double>& v, double dt) {
  if (v.size() < 2) return 0.0;
  double s = 0.5 * (v.front() + v.back());
  for (std::size_t n = 1; n + 1 < v.size(); ++n) s += v[n];
  return dt * s;
}

double interval_sum(const std::vector<double>& v, double dt) {
  double s = 0.0;
  for (double x : v) s += x;
  return dt * s;
}

void require_same_time(const TimeGrid& a, const TimeGrid& b) {
  if (a.steps != b.steps || a.dt != b.dt || a.t0 != b.t0)
    throw ConfigError("trajectories do not share a time grid");
}

// Squared slab norms of the velocity/pressure pieces used by N and the functionals.
struct VelocitySeries {
  std::vector<double> u2, u3, p1, p2;  // per node
  std::vector<double> du0, du1;        // per interval
};

VelocitySeries velocity_series(const std::vector<SlabVector>& u, const std::vector<SlabField>& p,
                               double dt) {
  VelocitySeries s;
  for (std::size_t n = 0; n < u.size(); ++n) {
    s.u2.push_back(sq(sobolev_norm_slab(u[n], 2)));
    s.u3.push_back(sq(sobolev_norm_slab(u[n], 3)));
    s.p1.push_back(sq(sobolev_norm_slab(p[n], 1)));
    s.p2.push_back(sq(sobolev_norm_slab(p[n], 2)));
  }
  for (std::size_t n = 0; n + 1 < u.size(); ++n) {
    const SlabVector d = (1.0 / dt) * (u[n + 1] - u[n]);
    s.du0.push_back(sq(sobolev_norm_slab(d, 0)));
    s.du1.push_back(sq(sobolev_norm_slab(d, 1)));
  }
  return s;
}

struct SurfaceSeries {
  std::vector<double> z52, r32;  // per node
  std::vector<double> rr12;      // per interval
};

SurfaceSeries surface_series(const std::vector<SurfaceField>& z, const std::vector<SurfaceField>& r,
                             double dt) {
  SurfaceSeries s;
  for (std::size_t n = 0; n < z.size(); ++n) {
    s.z52.push_back(sq(sobolev_norm_surface(z[n], 2.5)));
    s.r32.push_back(sq(sobolev_norm_surface(r[n], 1.5)));
  }
  for (std::size_t n = 0; n + 1 < r.size(); ++n)
    s.rr12.push_back(sq(sobolev_norm_surface((1.0 / dt) * (r[n + 1] - r[n]), 0.5)));
  return s;
}

std::string sweep_prefix(int sweep, int index, double t) {
  std::ostringstream os;
  os << "boundedness monitor tripped at sweep " << sweep << ", time index " << index << " (t = " << t
     << "): ";
  return os.str();
}

// Checks min J and closeness on every node of a surface trajectory; returns (min J, max closeness).
std::pair<double, double> enforce_monitors(const SurfaceTrajectory& eta, const SurfaceField& eta0,
                                           const BottomProfile& bottom, const ExtensionParams& params,
                                           const PicardConfig& cfg, int sweep, int first_index) {
  double min_j = std::numeric_limits<double>::infinity();
  double max_close = 0.0;
  for (std::size_t n = 0; n < eta.eta.size(); ++n) {
    const int idx = first_index + static_cast<int>(n);
    const double t = eta.time.time(static_cast<int>(n));
    const double j = min_jacobian(eta.eta[n], bottom, params.epsilon);
    const double c = sobolev_norm_surface(eta.eta[n] - eta0, 2.5);
    min_j = std::min(min_j, j);
    max_close = std::max(max_close, c);
    if (!(j > cfg.delta_floor)) {
      std::ostringstream os;
      os << sweep_prefix(sweep, idx, t) << "min J = " << j << " <= " << cfg.delta_floor
         << "; shrink T";
      throw MonitorError(os.str());
    }
    if (!(c <= cfg.closeness_cap)) {
      std::ostringstream os;
      os << sweep_prefix(sweep, idx, t) << "||eta - eta0||_{5/2} = " << c << " > "
         << cfg.closeness_cap << "; shrink T";
      throw MonitorError(os.str());
    }
  }
  return {min_j, max_close};
}

void attach_surface(Trajectory& traj, const SurfaceTrajectory& eta) {
  for (std::size_t n = 0; n < traj.states.size(); ++n) {
    traj.states[n].eta = eta.eta[n];
    traj.states[n].deta_dt = eta.deta_dt[n];
  }
}

double envelope_ratio(const std::vector<double>& d) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] > 0.0) {
      x.push_back(static_cast<double>(i));
      y.push_back(std::log(d[i]));
    }
  if (x.size() < 2) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += sq(x[i] - mx);
  return std::exp(sxy / sxx);
}

[[noreturn]] void contraction_failed(int sweep) {
  std::ostringstream os;
  os << "contraction failed: window too long (Picard distance non-decreasing through sweep "
     << sweep << ")";
  throw MonitorError(os.str());
}

PicardResult run_window(const InitialData& data, const PicardConfig& cfg, const TimeGrid& tg) {
  const auto& g = data.eta0.grid();
  PicardResult res;
  Trajectory prev;
  prev.time = tg;
  for (int n = 0; n <= tg.steps; ++n)
    prev.states.push_back(FlowState{tg.time(n), data.u0, data.p0, data.eta0, data.deta_dt0});
  SurfaceTrajectory eta_prev = solve_transport(data.eta0, surface_velocity(prev), tg);
  attach_surface(prev, eta_prev);
  enforce_monitors(eta_prev, data.eta0, data.bottom, data.params, cfg, 0, 0);

  std::vector<double> dists;
  int stall = 0;
  for (int m = 1; m <= cfg.max_picard; ++m) {
    LinearProblem pb;
    pb.eta = eta_prev;
    pb.bottom = data.bottom;
    pb.params = data.params;
    pb.u0 = data.u0;
    pb.p0 = data.p0;
    pb.jacobian_floor = cfg.delta_floor;
    for (int n = 0; n <= tg.steps; ++n) {
      if (n == 0) {
        pb.forcing.push_back({zero_vector(g), zero_surface_vector(g)});
        continue;
      }
      const GeometryPack pack = geometry_at(eta_prev, n, data.bottom, data.params);
      pb.forcing.push_back(assemble_forcing(prev.states[n].u, pack));
    }
    Trajectory cur;
    try {
      cur = solve_linear_ns_window(pb, cfg.elliptic);
    } catch (const MonitorError& e) {
      std::ostringstream os;
      os << "boundedness monitor tripped at sweep " << m << ": " << e.what() << "; shrink T";
      throw MonitorError(os.str());
    }
    SurfaceTrajectory eta_cur = solve_transport(data.eta0, surface_velocity(cur), tg);
    attach_surface(cur, eta_cur);
    const auto [min_j, close] =
        enforce_monitors(eta_cur, data.eta0, data.bottom, data.params, cfg, m, 0);

    SweepRecord rec;
    rec.sweep = m;
    rec.N_distance = picard_distance_N(cur, prev);
    rec.M_distance = picard_distance_M(eta_cur, eta_prev);
    rec.min_J = min_j;
    rec.max_closeness = close;
    rec.mean_drift = eta_cur.mean_drift;
    for (const auto& s : cur.steps) rec.max_stokes_iterations = std::max(rec.max_stokes_iterations, s.iterations);
    res.report.sweeps.push_back(rec);
    dists.push_back(rec.N_distance);
    prev = std::move(cur);
    eta_prev = std::move(eta_cur);
    res.report.sweep_count = m;

    if (rec.N_distance < cfg.tol_N) {
      res.report.converged = true;
      break;
    }
    if (dists.size() >= 2) {
      stall = dists.back() >= dists[dists.size() - 2] ? stall + 1 : 0;
      if (stall >= cfg.stall_sweeps) contraction_failed(m);
    }
  }
  res.report.ratio = envelope_ratio(dists);
  res.report.nonlinear_residual = nonlinear_residual(prev, eta_prev, data.bottom, data.params);
  res.traj = std::move(prev);
  res.eta = std::move(eta_prev);
  return res;
}

PicardResult run_step(const InitialData& data, const PicardConfig& cfg, const TimeGrid& tg) {
  PicardResult res;
  res.traj.time = tg;
  res.traj.states.push_back(FlowState{tg.t0, data.u0, data.p0, data.eta0, data.deta_dt0});
  res.eta.time = tg;
  res.eta.eta.push_back(data.eta0);
  res.eta.deta_dt.push_back(data.deta_dt0);
  res.report.converged = true;
  EllipticOptions opts = cfg.elliptic;
  opts.sigma = 1.0 / tg.dt;

  for (int n = 0; n < tg.steps; ++n) {
    const FlowState& cur = res.traj.states.back();
    const TimeGrid one{tg.time(n), tg.dt, 1};
    const SurfaceVector top_n = top_trace(cur.u);
    SlabVector u_guess = cur.u;
    SlabField p_guess = cur.p;
    SurfaceTrajectory eta_step = solve_transport(cur.eta, [&](double) { return top_n; }, one);
    std::vector<double> dists;
    int stall = 0;
    bool step_converged = false;
    int k = 0;
    StokesSolution sol;
    while (k < cfg.max_picard) {
      ++k;
      const GeometryPack pack =
          build_geometry(eta_step.eta[1], eta_step.deta_dt[1], data.bottom, data.params);
      if (!(pack.min_J() > cfg.delta_floor)) {
        std::ostringstream os;
        os << sweep_prefix(k, n + 1, tg.time(n + 1)) << "min J = " << pack.min_J() << " <= "
           << cfg.delta_floor << "; shrink dt";
        throw MonitorError(os.str());
      }
      const Forcing f = assemble_forcing(u_guess, pack);
      StokesRHS rhs{f.F + opts.sigma * cur.u, SlabField(pack.grid()), f.H};
      sol = solve_a_stokes(pack, rhs, opts, StokesSolution{u_guess, p_guess});
      const SurfaceVector top_new = top_trace(sol.u);
      eta_step = solve_transport(
          cur.eta,
          [&](double t) {
            const double w = (t - one.t0) / one.dt;
            SurfaceVector v;
            for (int c = 0; c < 3; ++c) v[c] = (1.0 - w) * top_n[c] + w * top_new[c];
            return v;
          },
          one);
      const double d = sq(sobolev_norm_slab(sol.u - u_guess, 2)) + sq(sobolev_norm_slab(sol.p - p_guess, 1));
      u_guess = sol.u;
      p_guess = sol.p;
      dists.push_back(d);
      if (d < cfg.tol_N) {
        step_converged = true;
        break;
      }
      if (dists.size() >= 2) {
        stall = dists.back() >= dists[dists.size() - 2] ? stall + 1 : 0;
        if (stall >= cfg.stall_sweeps) contraction_failed(k);
      }
    }
    SurfaceTrajectory tail;
    tail.time = {tg.time(n + 1), tg.dt, 0};
    tail.eta = {eta_step.eta[1]};
    tail.deta_dt = {eta_step.deta_dt[1]};
    enforce_monitors(tail, data.eta0, data.bottom, data.params, cfg, k, n + 1);

    StepInfo info;
    info.iterations = sol.iterations;
    info.residual = sol.residual;
    info.min_J = min_jacobian(eta_step.eta[1], data.bottom, data.params.epsilon);
    res.traj.steps.push_back(info);
    res.traj.states.push_back(
        FlowState{tg.time(n + 1), u_guess, p_guess, eta_step.eta[1], eta_step.deta_dt[1]});
    res.eta.eta.push_back(eta_step.eta[1]);
    res.eta.deta_dt.push_back(eta_step.deta_dt[1]);
    res.report.step_sweeps.push_back(k);
    res.report.sweep_count = std::max(res.report.sweep_count, k);
    if (!step_converged) {
      res.report.converged = false;
      break;
    }
  }
  res.eta.mean_drift = std::abs(res.eta.eta.back().mean() - data.eta0.mean());
  if (res.report.converged)
    res.report.nonlinear_residual = nonlinear_residual(res.traj, res.eta, data.bottom, data.params);
  return res;
}

}  // namespace

void PicardConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("picard: dt must be positive");
  if (!(T >= dt)) throw ConfigError("picard: T must be at least dt");
  if (!(tol_N > 0.0)) throw ConfigError("picard: tol_N must be positive");
  if (max_picard < 1) throw ConfigError("picard: max_picard must be positive");
  if (!(delta_floor >= 0.0)) throw ConfigError("picard: delta floor must be nonnegative");
  if (!(closeness_cap > 0.0)) throw ConfigError("picard: closeness cap must be positive");
  if (stall_sweeps < 1) throw ConfigError("picard: stall_sweeps must be positive");
}

double picard_distance_N(const Trajectory& a, const Trajectory& b) {
  require_same_time(a.time, b.time);
  if (a.states.size() != b.states.size()) throw ConfigError("trajectories do not share a time grid");
  std::vector<SlabVector> v;
  std::vector<SlabField> q;
  for (std::size_t n = 0; n < a.states.size(); ++n) {
    for (int c = 0; c < 3; ++c) require_same_grid(a.states[n].u[c].grid(), b.states[n].u[c].grid(), "N-distance");
    v.push_back(a.states[n].u - b.states[n].u);
    q.push_back(a.states[n].p - b.states[n].p);
  }
  const double dt = a.time.dt;
  const VelocitySeries s = velocity_series(v, q, dt);
  return sup(s.u2) + trapezoid(s.u3, dt) + sup(s.du0) + interval_sum(s.du1, dt) + sup(s.p1) +
         trapezoid(s.p2, dt);
}

double picard_distance_M(const SurfaceTrajectory& a, const SurfaceTrajectory& b) {
  require_same_time(a.time, b.time);
  if (a.eta.size() != b.eta.size() || a.deta_dt.size() != b.deta_dt.size())
    throw ConfigError("trajectories do not share a time grid");
  std::vector<SurfaceField> z, r;
  for (std::size_t n = 0; n < a.eta.size(); ++n) {
    z.push_back(a.eta[n] - b.eta[n]);
    r.push_back(a.deta_dt[n] - b.deta_dt[n]);
  }
  const SurfaceSeries s = surface_series(z, r, a.time.dt);
  return sup(s.z52) + sup(s.r32) + interval_sum(s.rr12, a.time.dt);
}

PicardResult run_picard(const InitialData& data, const PicardConfig& cfg) {
  cfg.validate();
  const TimeGrid tg = TimeGrid::over(cfg.T, cfg.dt);
  return cfg.mode == PicardMode::window ? run_window(data, cfg, tg) : run_step(data, cfg, tg);
}

double nonlinear_residual(const Trajectory& traj, const SurfaceTrajectory& eta,
                          const BottomProfile& bottom, const ExtensionParams& params) {
  double worst = 0.0;
  const double sigma = 1.0 / traj.time.dt;
  for (int n = 0; n < traj.time.steps; ++n) {
    const GeometryPack pack = geometry_at(eta, n + 1, bottom, params);
    const FlowState& s = traj.states[n + 1];
    const Forcing f = assemble_forcing(s.u, pack);
    const StokesRHS rhs{f.F + sigma * traj.states[n].u, SlabField(pack.grid()), f.H};
    worst = std::max(worst, stokes_residual(pack, rhs, s.u, s.p, sigma).relative());
  }
  return worst;
}

Functionals functionals(const Trajectory& traj) {
  if (traj.states.size() < 2) throw ConfigError("functionals: need at least two time nodes");
  const double dt = traj.time.dt;
  std::vector<SlabVector> u;
  std::vector<SlabField> p;
  std::vector<SurfaceField> eta, rate;
  for (const auto& s : traj.states) {
    u.push_back(s.u);
    p.push_back(s.p);
    eta.push_back(s.eta);
    rate.push_back(s.deta_dt.empty() ? SurfaceField(s.eta.grid()) : s.deta_dt);
  }
  const VelocitySeries v = velocity_series(u, p, dt);
  const SurfaceSeries e = surface_series(eta, rate, dt);
  Functionals f;
  f.E_up = sup(v.u2) + sup(v.du0) + sup(v.p1);
  f.D_up = trapezoid(v.u3, dt) + interval_sum(v.du1, dt) + trapezoid(v.p2, dt);
  f.K_up = f.E_up + f.D_up;
  f.E_eta = sup(e.z52) + sup(e.r32);
  f.D_eta = trapezoid(e.z52, dt) + trapezoid(e.r32, dt) + interval_sum(e.rr12, dt);
  f.K_eta = f.E_eta + f.D_eta;
  f.Q_u = trapezoid(v.u3, dt) + interval_sum(v.du1, dt) + sup(v.u2);
  f.truncations = {
      "E(u,p): j = 0 and j = 1 terms only; d_t u from forward differences",
      "D(u,p): j = 0 and j = 1 terms only; d_t^2 u term omitted",
      "E(eta), D(eta): d_t eta from the transport rate u . N; d_t^2 eta from differences of the rate",
      "Q(u): d_t^2 u term omitted",
  };
  return f;
}

}  // namespace slabflow
