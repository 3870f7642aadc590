#pragma once

// Picard coupling of the linear Navier-Stokes window and surface transport.

#include <string>
#include <vector>

#include "slabflow/evolution.hpp"

namespace slabflow {

enum class PicardMode { window, step };

struct PicardConfig {
  double T = 0.05;
  double dt = 0.005;
  double tol_N = 1e-18;  // on the squared N-distance
  int max_picard = 30;
  PicardMode mode = PicardMode::window;
  double delta_floor = 0.25;
  double closeness_cap = 1.0;  // on ||eta - eta0||_{5/2}
  int stall_sweeps = 3;
  EllipticOptions elliptic;

  /// Throws ConfigError on violated invariants.
  void validate() const;
};

struct SweepRecord {
  int sweep = 0;
  double N_distance = 0.0;
  double M_distance = 0.0;
  double min_J = 0.0;
  double max_closeness = 0.0;
  double mean_drift = 0.0;
  int max_stokes_iterations = 0;
};

struct PicardReport {
  std::vector<SweepRecord> sweeps;   // window mode: one per sweep
  std::vector<int> step_sweeps;      // step mode: sweeps used by each time step
  bool converged = false;
  int sweep_count = 0;
  double nonlinear_residual = 0.0;
  double ratio = 0.0;  // geometric-envelope fit of successive N-distances
};

struct PicardResult {
  Trajectory traj;
  SurfaceTrajectory eta;
  PicardReport report;
};

/// Squared space-time distance: sup ||v||_2^2 + int ||v||_3^2 + sup ||d_t v||_0^2
/// + int ||d_t v||_1^2 + sup ||q||_1^2 + int ||q||_2^2 for v = u_a - u_b, q = p_a - p_b.
double picard_distance_N(const Trajectory& a, const Trajectory& b);

/// Squared surface distance: sup ||z||_{5/2}^2 + sup ||d_t z||_{3/2}^2 + int ||d_t^2 z||_{1/2}^2.
double picard_distance_M(const SurfaceTrajectory& a, const SurfaceTrajectory& b);

/// Throws MonitorError ("boundedness monitor tripped", "contraction failed: window too long")
/// or SolverError; a run that exhausts max_picard returns with converged = false.
PicardResult run_picard(const InitialData& data, const PicardConfig& cfg);

/// Max over steps of the relative residual of the backward-Euler transformed
/// system, with geometry and forcing taken from the trajectory itself.
double nonlinear_residual(const Trajectory& traj, const SurfaceTrajectory& eta,
                          const BottomProfile& bottom, const ExtensionParams& params);

/// Low-order truncations of the energy and dissipation functionals.
struct Functionals {
  double E_up = 0.0;   // sup ||u||_2^2 + sup ||d_t u||_0^2 + sup ||p||_1^2
  double D_up = 0.0;   // int ||u||_3^2 + int ||d_t u||_1^2 + int ||p||_2^2
  double K_up = 0.0;   // E_up + D_up
  double E_eta = 0.0;  // sup ||eta||_{5/2}^2 + sup ||d_t eta||_{3/2}^2
  double D_eta = 0.0;  // int ||eta||_{5/2}^2 + int ||d_t eta||_{3/2}^2 + int ||d_t^2 eta||_{1/2}^2
  double K_eta = 0.0;
  double Q_u = 0.0;    // int ||u||_3^2 + int ||d_t u||_1^2 + sup ||u||_2^2
  std::vector<std::string> truncations;
};

/// Requires at least two time nodes.
Functionals functionals(const Trajectory& traj);

}  // namespace slabflow
