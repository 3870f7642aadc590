#pragma once

// Health reports: energy identity, norm equivalence, and numerical checks of
// the extension, geometry and transport lemmas.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "slabflow/iteration.hpp"

namespace slabflow {

/// Forcing recomputed from each state of a trajectory (velocity and surface at that node).
std::vector<Forcing> trajectory_forcing(const Trajectory& traj, const BottomProfile& bottom,
                                        const ExtensionParams& params);

/// |LHS - RHS| / max(|LHS|, |RHS|, 1e-14) for
///   1/2 int J|u(T)|^2 + 1/2 sum dt int J|D_A u|^2
///     = 1/2 int J0|u0|^2 + 1/2 sum dt int J_t|u|^2 + sum dt int J F.u - sum dt int_Sigma H.u,
/// with right-endpoint sums over the steps. States must carry eta and d_t eta.
double energy_identity_residual(const Trajectory& traj, const std::vector<Forcing>& forcing,
                                const BottomProfile& bottom, const ExtensionParams& params);

/// int J |D_A u|^2 / ||u||_1^2.
double korn_ratio(const GeometryPack& pack, const SlabVector& u);

/// Extreme Korn ratios over the span of seeded random fields vanishing on the bottom.
/// Throws ConfigError when samples < 10.
std::pair<double, double> norm_equivalence_ratios(const GeometryPack& pack, int samples,
                                                  std::uint64_t seed = 1);

struct LemmaCheck {
  double value = 0.0;
  double threshold = 0.0;
  std::string kind;  // "identity" (value <= threshold), "bound" (slack <= threshold),
                     // "slope" (|value - 1| <= threshold), "ratio" (reported, finite)
  bool pass = false;
};

using LemmaChecks = std::map<std::string, LemmaCheck>;

struct LemmaSuiteOptions {
  GridSpec grid{1.0, 1.0, 1.0, 32, 32, 17, true};
  double amplitude = 0.05;       // eta = amplitude cos(2 pi x1)
  int samples = 20;              // random surfaces per epsilon
  std::vector<double> epsilons{0.01, 0.1, 1.0};
  double slope_eps_min = 1e-3;
  double slope_eps_max = 1e-1;
  int slope_points = 7;
  double transport_constant = 1.0;
  std::uint64_t seed = 1;
  double identity_tol = 1e-8;
  double corrupt_geometry = 0.0;  // test hook: perturbs J before the identity checks
};

struct ScalingPoint {
  double epsilon = 0.0;
  double sup_dz = 0.0;
};

/// sup |d3 P^eps f| for f = cos(2 pi x1 / L1) at log-spaced eps.
std::vector<ScalingPoint> epsilon_scaling_study(const GridPtr& grid, double eps_min, double eps_max,
                                                int points);

/// Least-squares slope of log(sup) against log(eps).
double scaling_slope(const std::vector<ScalingPoint>& pts);

LemmaChecks run_lemma_suite(const ExtensionParams& params, const LemmaSuiteOptions& opts = {});

bool identities_pass(const LemmaChecks& checks);
bool all_pass(const LemmaChecks& checks);

struct DiagnosticsReport {
  double energy_residual = 0.0;
  double min_J = 0.0;
  double div_residual = 0.0;
  double bottom_slip = 0.0;
  std::pair<double, double> norm_equiv_ratios{0.0, 0.0};
  LemmaChecks lemma_checks;
  Functionals functionals;
};

/// Report for a converged Picard run; the lemma checks are left for the caller.
DiagnosticsReport diagnose(const PicardResult& result, const InitialData& data, int korn_samples = 10,
                           std::uint64_t seed = 1);

}  // namespace slabflow
