#include "slabflow/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "slabflow/error.hpp"

namespace slabflow {

namespace {

// Quadratic products follow the 2/3 rule when the grid asks for it.
SlabField nl_product(const SlabField& a, const SlabField& b) {
  if (!a.grid()->spec().dealias) return multiply(a, b);
  return multiply(dealias(a), dealias(b), true);
}

SurfaceField nl_product(const SurfaceField& a, const SurfaceField& b) {
  if (!a.grid()->spec().dealias) return multiply(a, b);
  return multiply(dealias(a), dealias(b), true);
}

double interior_max_abs(const SlabField& f) {
  double m = 0.0;
  for (int k = 1; k < f.grid()->nz() - 1; ++k)
    for (double v : f.layer(k)) m = std::max(m, std::abs(v));
  return m;
}

double pointwise_max_norm(const SurfaceVector& v) {
  double m = 0.0;
  for (std::size_t n = 0; n < v[0].values().size(); ++n) {
    const double a = v[0].values()[n], b = v[1].values()[n], c = v[2].values()[n];
    m = std::max(m, std::sqrt(a * a + b * b + c * c));
  }
  return m;
}

SurfaceField dot(const SurfaceVector& a, const SurfaceVector& b) {
  return multiply(a[0], b[0]) + multiply(a[1], b[1]) + multiply(a[2], b[2]);
}

std::string at_time(double t) {
  std::ostringstream os;
  os << "t = " << t;
  return os.str();
}

}  // namespace

TimeGrid TimeGrid::over(double T, double dt, double t0) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("time: dt must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("time: T must be positive");
  const double n = std::round(T / dt);
  if (n < 1 || std::abs(n * dt - T) > 1e-9 * T)
    throw ConfigError("time: T must be a positive multiple of dt");
  return {t0, dt, static_cast<int>(n)};
}

// ------------------------------------------------------------------ forcing

Forcing assemble_forcing(const SlabVector& u, const GeometryPack& pack) {
  if (!pack.dt) throw ConfigError("assemble_forcing: geometry lacks a time derivative");
  const auto& g = pack.grid();
  SlabField coef(g);
  auto c = coef.values();
  for (std::size_t n = 0; n < c.size(); ++n)
    c[n] = pack.dt->etabar_t.values()[n] * pack.btilde.values()[n] * pack.K.values()[n];
  Forcing out{zero_vector(g), zero_surface_vector(g)};
  for (int i = 0; i < 3; ++i) {
    const SlabVector grad = grad_A(pack, u[i]);
    SlabField f = nl_product(coef, vertical_derivative(u[i]));
    for (int j = 0; j < 3; ++j) f -= nl_product(u[j], grad[j]);
    out.F[i] = std::move(f);
    out.H[i] = nl_product(pack.eta, pack.Ntop[i]);
  }
  return out;
}

// ------------------------------------------------------------------ initial data

double check_compatibility(const GeometryPack& pack0, const SlabVector& u0, const SurfaceVector& H0) {
  const auto& g = pack0.grid();
  // -(D_A u0) N0 is the traction of the stress with zero pressure.
  const SurfaceVector t = surface_traction(stress_A(pack0, SlabField(g), u0), pack0.Ntop);
  SurfaceVector v = H0;
  for (int i = 0; i < 3; ++i) v[i] -= t[i];
  return pointwise_max_norm(project_tangent(v, pack0.eta));
}

InitialData build_initial_data(const SlabVector& u0, const SurfaceField& eta0,
                               const BottomProfile& bottom, const ExtensionParams& params,
                               const InitialDataOptions& opts) {
  const auto& g = eta0.grid();
  for (int i = 0; i < 3; ++i) require_same_grid(g, u0[i].grid(), "initial data");
  const double scale = std::max(max_abs(u0), 1e-300);
  if (max_abs(bottom_trace(u0)) > 1e-10 * std::max(1.0, scale))
    throw ConfigError("initial velocity violates no-slip on the bottom");

  InitialData d;
  d.u0 = u0;
  d.eta0 = eta0;
  d.bottom = bottom;
  d.params = params;
  d.deta_dt0 = transport_rate(eta0, top_trace(u0));
  const GeometryPack pack = build_geometry(eta0, d.deta_dt0, bottom, params);

  const double div = interior_max_abs(div_A(pack, u0));
  if (div > opts.divergence_tol * scale) {
    std::ostringstream os;
    os << "initial velocity is not div_A-free: max |div_A u0| = " << div;
    throw ConfigError(os.str());
  }

  const Forcing f0 = assemble_forcing(u0, pack);
  d.compat_residual = check_compatibility(pack, u0, f0.H);
  if (d.compat_residual > opts.compat_tol && !opts.compat_warn_only) {
    std::ostringstream os;
    os << "incompatible initial data: sup |Pi0(H(0) + D_A u0 N0)| = " << d.compat_residual
       << " exceeds " << opts.compat_tol;
    throw ConfigError(os.str());
  }

  // Surface value (H(0) + D_A u0 N0) . N0 / |N0|^2.
  const SurfaceVector t = surface_traction(stress_A(pack, SlabField(g), u0), pack.Ntop);
  SurfaceVector v = f0.H;
  for (int i = 0; i < 3; ++i) v[i] -= t[i];
  const SurfaceField vn = dot(v, pack.Ntop);
  const SurfaceField nn = dot(pack.Ntop, pack.Ntop);
  SurfaceField gtop(g);
  for (std::size_t n = 0; n < gtop.values().size(); ++n)
    gtop.values()[n] = vn.values()[n] / nn.values()[n];

  const SlabVector Ru0 = apply_R(pack, u0);
  const SlabVector lap_u0 = lap_A(pack, u0);
  const SurfaceVector nu = bottom_normal(bottom);
  const SurfaceField h = dot(bottom_trace(lap_u0), nu);
  const PoissonSolution ps = solve_a_poisson_divergence_form(
      pack, -1.0 * div_A(pack, Ru0), -1.0 * f0.F, gtop, h, opts.elliptic);
  d.p0 = ps.p;
  d.pressure_residual = ps.residual;

  d.dtu0 = lap_u0 - grad_A(pack, d.p0) + f0.F;
  d.Dtu0 = d.dtu0 - Ru0;
  return d;
}

// ------------------------------------------------------------------ transport

SurfaceField transport_rate(const SurfaceField& eta, const SurfaceVector& u) {
  const auto d = horizontal_gradient(eta);
  SurfaceField r = u[2];
  r -= nl_product(u[0], d[0]);
  r -= nl_product(u[1], d[1]);
  return r;
}

SurfaceVelocity surface_velocity(const Trajectory& traj) {
  auto traces = std::make_shared<std::vector<SurfaceVector>>();
  for (const auto& s : traj.states) traces->push_back(top_trace(s.u));
  const TimeGrid tg = traj.time;
  return [traces, tg](double t) {
    if (traces->size() == 1 || tg.dt <= 0.0) return traces->front();
    const double x = std::clamp((t - tg.t0) / tg.dt, 0.0, static_cast<double>(traces->size() - 1));
    const std::size_t n = std::min(static_cast<std::size_t>(x), traces->size() - 2);
    const double w = x - static_cast<double>(n);
    SurfaceVector out;
    for (int c = 0; c < 3; ++c) out[c] = (1.0 - w) * (*traces)[n][c] + w * (*traces)[n + 1][c];
    return out;
  };
}

SurfaceTrajectory solve_transport(const SurfaceField& eta0, const SurfaceVelocity& u,
                                  const TimeGrid& time) {
  const auto& g = eta0.grid();
  const double kmax = std::max(g->n1() / g->spec().L1, g->n2() / g->spec().L2);
  SurfaceTrajectory out;
  out.time = time;
  out.eta.reserve(time.steps + 1);
  out.eta.push_back(eta0);
  const double dt = time.dt;
  for (int n = 0; n <= time.steps; ++n) {
    const double t = time.time(n);
    const SurfaceVector un = u(t);
    double uh = 0.0;
    for (std::size_t q = 0; q < un[0].values().size(); ++q)
      uh = std::max(uh, std::hypot(un[0].values()[q], un[1].values()[q]));
    const SurfaceField& e = out.eta.back();
    out.deta_dt.push_back(transport_rate(e, un));
    if (n == time.steps) break;
    if (dt * uh * kmax >= 0.5) {
      std::ostringstream os;
      os << "transport CFL violated: dt = " << dt << " gives dt max|u_h| max(N/L) = "
         << dt * uh * kmax << " >= 0.5 at " << at_time(t);
      throw SolverError(os.str());
    }
    const SurfaceVector um = u(t + 0.5 * dt);
    const SurfaceVector ue = u(t + dt);
    const SurfaceField& k1 = out.deta_dt.back();
    const SurfaceField k2 = transport_rate(e + (0.5 * dt) * k1, um);
    const SurfaceField k3 = transport_rate(e + (0.5 * dt) * k2, um);
    const SurfaceField k4 = transport_rate(e + dt * k3, ue);
    SurfaceField next = e;
    next += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out.eta.push_back(std::move(next));
  }
  out.mean_drift = std::abs(out.eta.back().mean() - eta0.mean());
  return out;
}

// ------------------------------------------------------------------ linear window

GeometryPack geometry_at(const SurfaceTrajectory& eta, int n, const BottomProfile& bottom,
                         const ExtensionParams& params) {
  std::optional<SurfaceField> rate;
  if (static_cast<std::size_t>(n) < eta.deta_dt.size()) rate = eta.deta_dt[n];
  return build_geometry(eta.eta[n], rate, bottom, params);
}

Trajectory solve_linear_ns_window(const LinearProblem& pb, const EllipticOptions& opts) {
  const TimeGrid& tg = pb.eta.time;
  const std::size_t nodes = static_cast<std::size_t>(tg.steps) + 1;
  if (pb.eta.eta.size() != nodes || pb.forcing.size() != nodes)
    throw ConfigError("linear window: trajectory lengths do not match the time grid");
  if (!(tg.dt > 0.0)) throw ConfigError("linear window: dt must be positive");
  const auto& g = pb.u0[0].grid();

  Trajectory out;
  out.time = tg;
  FlowState s0;
  s0.t = tg.t0;
  s0.u = pb.u0;
  s0.p = pb.p0.empty() ? SlabField(g) : pb.p0;
  s0.eta = pb.eta.eta[0];
  if (!pb.eta.deta_dt.empty()) s0.deta_dt = pb.eta.deta_dt[0];
  out.states.push_back(std::move(s0));

  EllipticOptions step_opts = opts;
  step_opts.sigma = 1.0 / tg.dt;
  for (int n = 0; n < tg.steps; ++n) {
    const double t = tg.time(n + 1);
    const GeometryPack pack = geometry_at(pb.eta, n + 1, pb.bottom, pb.params);
    const double mj = pack.min_J();
    if (mj <= pb.jacobian_floor) {
      std::ostringstream os;
      os << "Jacobian floor violated at " << at_time(t) << ": min J = " << mj
         << " <= " << pb.jacobian_floor;
      throw MonitorError(os.str());
    }
    const FlowState& prev = out.states.back();
    StokesRHS rhs{pb.forcing[n + 1].F + step_opts.sigma * prev.u, SlabField(g), pb.forcing[n + 1].H};
    StokesSolution guess{prev.u, prev.p};
    StokesSolution sol;
    try {
      sol = solve_a_stokes(pack, rhs, step_opts, guess);
    } catch (const SolverError& e) {
      std::ostringstream os;
      os << "linear window step " << n + 1 << " (" << at_time(t) << "): " << e.what();
      throw SolverError(os.str());
    }
    StepInfo info;
    info.iterations = sol.iterations;
    info.residual = sol.residual;
    info.divergence = interior_max_abs(div_A(pack, sol.u));
    info.bottom_slip = max_abs(bottom_trace(sol.u));
    info.min_J = mj;
    out.steps.push_back(info);

    FlowState s;
    s.t = t;
    s.u = std::move(sol.u);
    s.p = std::move(sol.p);
    s.eta = pb.eta.eta[n + 1];
    if (static_cast<std::size_t>(n + 1) < pb.eta.deta_dt.size()) s.deta_dt = pb.eta.deta_dt[n + 1];
    out.states.push_back(std::move(s));
  }
  return out;
}

}  // namespace slabflow
