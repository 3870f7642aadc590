#pragma once

// Time-dependent pieces: nonlinear forcing, initial data, surface transport
// and the backward-Euler linear Navier-Stokes window.

#include <functional>
#include <vector>

#include "slabflow/elliptic.hpp"

namespace slabflow {

/// Uniform time grid t_n = t0 + n dt, n = 0..steps.
struct TimeGrid {
  double t0 = 0.0;
  double dt = 0.0;
  int steps = 0;

  double time(int n) const { return t0 + n * dt; }
  double end() const { return time(steps); }
  /// Grid covering [t0, t0 + T] with steps = round(T / dt); throws ConfigError on bad input.
  static TimeGrid over(double T, double dt, double t0 = 0.0);
};

struct FlowState {
  double t = 0.0;
  SlabVector u;
  SlabField p;
  SurfaceField eta;
  SurfaceField deta_dt;
};

struct StepInfo {
  int iterations = 0;
  double residual = 0.0;
  double divergence = 0.0;   // max |div_A u| over interior nodes
  double bottom_slip = 0.0;  // max |u| on the bottom
  double min_J = 0.0;
};

struct Trajectory {
  TimeGrid time;
  std::vector<FlowState> states;  // one per time node
  std::vector<StepInfo> steps;    // one per step, entry n describes t_{n+1}
};

struct SurfaceTrajectory {
  TimeGrid time;
  std::vector<SurfaceField> eta;
  std::vector<SurfaceField> deta_dt;
  double mean_drift = 0.0;  // |mean(eta_end) - mean(eta_0)|
};

struct Forcing {
  SlabVector F;
  SurfaceVector H;
};

/// F = d_t etabar btilde K d3 u - u . grad_A u and H = eta N, with 2/3-truncated products.
/// The pack must carry a time derivative.
Forcing assemble_forcing(const SlabVector& u, const GeometryPack& pack);

struct InitialDataOptions {
  double compat_tol = 1e-8;
  bool compat_warn_only = false;
  double divergence_tol = 1e-8;  // relative to max |u0|
  EllipticOptions elliptic;
};

struct InitialData {
  SlabVector u0;
  SurfaceField eta0;
  SurfaceField deta_dt0;  // u0 . N0 on the surface
  SlabField p0;
  SlabVector dtu0;  // d_t u(0)
  SlabVector Dtu0;  // d_t u(0) - R(0) u0
  BottomProfile bottom;
  ExtensionParams params;
  double compat_residual = 0.0;
  double pressure_residual = 0.0;
};

/// sup |Pi0(H(0) + D_{A0} u0 N0)| on the surface.
double check_compatibility(const GeometryPack& pack0, const SlabVector& u0, const SurfaceVector& H0);

/// Throws ConfigError("incompatible initial data ...") above compat_tol unless warn-only.
InitialData build_initial_data(const SlabVector& u0, const SurfaceField& eta0,
                               const BottomProfile& bottom, const ExtensionParams& params,
                               const InitialDataOptions& opts = {});

/// Surface velocity trace as a function of time.
using SurfaceVelocity = std::function<SurfaceVector(double)>;

/// Linear interpolation of the surface traces of a trajectory's velocities.
SurfaceVelocity surface_velocity(const Trajectory& traj);

/// RK4 for d_t eta + u1 d1 eta + u2 d2 eta = u3. Throws SolverError naming dt on CFL violation.
SurfaceTrajectory solve_transport(const SurfaceField& eta0, const SurfaceVelocity& u,
                                  const TimeGrid& time);

/// Right-hand side u3 - u1 d1 eta - u2 d2 eta (dealiased), i.e. u . N.
SurfaceField transport_rate(const SurfaceField& eta, const SurfaceVector& u);

struct LinearProblem {
  SurfaceTrajectory eta;  // coefficients at every node
  BottomProfile bottom;
  ExtensionParams params;
  SlabVector u0;
  SlabField p0;                       // optional, stored in the first state
  std::vector<Forcing> forcing;       // one per time node
  double jacobian_floor = 0.0;        // MonitorError when min J <= floor
};

/// Backward Euler; step n solves the A-Stokes problem with sigma = 1/dt,
/// geometry and forcing at t_{n+1}, and F + u_n / dt on the right.
Trajectory solve_linear_ns_window(const LinearProblem& problem, const EllipticOptions& opts = {});

/// Geometry at node n of a surface trajectory.
GeometryPack geometry_at(const SurfaceTrajectory& eta, int n, const BottomProfile& bottom,
                         const ExtensionParams& params);

}  // namespace slabflow
