#include "slabflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "slabflow/error.hpp"
#include "slabflow/random_fields.hpp"

namespace slabflow {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEnergyFloor = 1e-14;

double weighted_dot(const SlabField& w, const SlabVector& a, const SlabVector& b) {
  double s = 0.0;
  for (int c = 0; c < 3; ++c) s += integrate(multiply(w, multiply(a[c], b[c])));
  return s;
}

double surface_dot(const SurfaceVector& a, const SurfaceVector& b) {
  double s = 0.0;
  for (int c = 0; c < 3; ++c) s += integrate(multiply(a[c], b[c]));
  return s;
}

double weighted_tensor_square(const SlabField& w, const SlabTensor& d) {
  SlabField sum(w.grid());
  for (const auto& row : d)
    for (const auto& e : row) sum += multiply(e, e);
  return integrate(multiply(w, sum));
}

GeometryPack pack_for(const FlowState& s, const BottomProfile& bottom, const ExtensionParams& params) {
  const SurfaceField rate = s.deta_dt.empty() ? SurfaceField(s.eta.grid()) : s.deta_dt;
  return build_geometry(s.eta, rate, bottom, params);
}

LemmaCheck make_check(double value, double threshold, const std::string& kind) {
  LemmaCheck c{value, threshold, kind, false};
  if (!std::isfinite(value)) return c;
  if (kind == "slope")
    c.pass = std::abs(value - 1.0) <= threshold;
  else if (kind == "ratio")
    c.pass = true;
  else
    c.pass = value <= threshold;
  return c;
}

double sup_gradient(const SlabField& f) {
  const auto h = horizontal_gradient(f);
  const SlabField d3 = vertical_derivative(f);
  double m = 0.0;
  const auto a = h[0].values(), b = h[1].values(), c = d3.values();
  for (std::size_t n = 0; n < a.size(); ++n) m = std::max(m, std::sqrt(a[n] * a[n] + b[n] * b[n] + c[n] * c[n]));
  return m;
}

void identity_checks(LemmaChecks& out, const std::string& suffix, const GridSpec& spec,
                     const LemmaSuiteOptions& opts, const ExtensionParams& params) {
  const auto g = Grid::create(spec);
  const double amp = opts.amplitude;
  const double L1 = spec.L1;
  const auto eta = SurfaceField::from_function(g, [amp, L1](double x1, double) { return amp * std::cos(2 * kPi * x1 / L1); });
  const auto rate = SurfaceField::from_function(g, [amp, L1](double x1, double) { return amp * std::sin(2 * kPi * x1 / L1); });
  GeometryPack pack = build_geometry(eta, rate, BottomProfile::flat(g), params);
  if (opts.corrupt_geometry != 0.0)
    pack.J += SlabField::from_function(g, [&](double x1, double, double) { return opts.corrupt_geometry * std::sin(2 * kPi * x1 / L1); });
  const IdentityReport rep = verify_identities(pack);
  out["identity.piola" + suffix] = make_check(rep.piola, opts.identity_tol, "identity");
  out["identity.jae3_top" + suffix] = make_check(rep.jae3_top, opts.identity_tol, "identity");
  out["identity.jae3_bottom" + suffix] = make_check(rep.jae3_bottom, opts.identity_tol, "identity");
  if (rep.r_identity) out["identity.r_transpose_n" + suffix] = make_check(*rep.r_identity, opts.identity_tol, "identity");
}

void extension_checks(LemmaChecks& out, const GridPtr& g, const LemmaSuiteOptions& opts) {
  TrialRng rng(opts.seed);
  const double b0 = g->spec().b0;
  double trace = 0.0, bound1 = 0.0, bound2 = 0.0, sup0 = 0.0, sup1 = 0.0, vert = 0.0;
  for (double eps : opts.epsilons) {
    for (int s = 0; s < opts.samples; ++s) {
      const SurfaceField f = random_surface(g, rng, 4, true);
      const SlabField lift = poisson_extend(f, eps);
      trace = std::max(trace, (lift.top() - f).max_abs());
      const double c = kPi * (1.0 + b0) / eps;
      bound1 = std::max(bound1, std::pow(sobolev_norm_slab(lift, 1), 2) / (c * std::pow(sobolev_norm_surface(f, 0.5), 2)));
      bound2 = std::max(bound2, std::pow(sobolev_norm_slab(lift, 2), 2) / (c * std::pow(sobolev_norm_surface(f, 1.5), 2)));
      sup0 = std::max(sup0, std::pow(lift.max_abs(), 2) / std::pow(sobolev_norm_surface(f, 1.5), 2));
      sup1 = std::max(sup1, std::pow(sup_gradient(lift), 2) / std::pow(sobolev_norm_surface(f, 2.5), 2));
      const double dz = vertical_derivative(lift).max_abs();
      vert = std::max(vert, dz * dz / (eps * std::pow(sobolev_norm_surface(f, 2.5), 2)));
    }
  }
  out["extension.trace"] = make_check(trace, 1e-12, "identity");
  out["extension.bound_h1"] = make_check(bound1, 1.0, "bound");
  out["extension.bound_h2"] = make_check(bound2, 1.0, "bound");
  out["extension.sup_q0"] = make_check(sup0, 0.0, "ratio");
  out["extension.sup_q1"] = make_check(sup1, 0.0, "ratio");
  out["extension.vertical_sup"] = make_check(vert, 0.0, "ratio");

  const auto pts = epsilon_scaling_study(g, opts.slope_eps_min, opts.slope_eps_max, opts.slope_points);
  out["extension.eps_slope"] = make_check(scaling_slope(pts), 0.05, "slope");
}

double gradient_norm(const SurfaceVector& u) {
  double s = 0.0;
  for (int c = 0; c < 2; ++c)
    for (int a = 0; a < 2; ++a) s += std::pow(sobolev_norm_surface(horizontal_derivative(u[c], a + 1), 1.5), 2);
  return std::sqrt(s);
}

void transport_check(LemmaChecks& out, const GridPtr& g, const LemmaSuiteOptions& opts) {
  TrialRng rng(opts.seed + 7);
  const SurfaceField eta0 = 0.05 * random_surface(g, rng, 3);
  const SurfaceVector base{0.3 * random_surface(g, rng, 3), 0.3 * random_surface(g, rng, 3),
                           0.1 * random_surface(g, rng, 3)};
  const SurfaceVelocity vel = [base](double t) {
    const double s = 1.0 + 0.5 * std::sin(2 * kPi * t);
    return SurfaceVector{s * base[0], s * base[1], s * base[2]};
  };
  const TimeGrid tg = TimeGrid::over(0.5, 0.01);
  const SurfaceTrajectory tr = solve_transport(eta0, vel, tg);

  const double eta0_norm = sobolev_norm_surface(eta0, 3);
  double grad_int = 0.0, src_int = 0.0, slack = 0.0;
  double grad_prev = gradient_norm(vel(tg.time(0))), src_prev = sobolev_norm_surface(vel(tg.time(0))[2], 3);
  for (int n = 1; n <= tg.steps; ++n) {
    const SurfaceVector u = vel(tg.time(n));
    const double gn = gradient_norm(u), sn = sobolev_norm_surface(u[2], 3);
    grad_int += 0.5 * tg.dt * (gn + grad_prev);
    src_int += 0.5 * tg.dt * (sn + src_prev);
    grad_prev = gn;
    src_prev = sn;
    const double rhs = std::exp(opts.transport_constant * grad_int) * (eta0_norm + src_int);
    slack = std::max(slack, sobolev_norm_surface(tr.eta[n], 3) / rhs);
  }
  out["transport.bound_h3"] = make_check(slack, 0.0, "ratio");
}

}  // namespace

std::vector<Forcing> trajectory_forcing(const Trajectory& traj, const BottomProfile& bottom,
                                        const ExtensionParams& params) {
  std::vector<Forcing> out;
  out.reserve(traj.states.size());
  for (const auto& s : traj.states) out.push_back(assemble_forcing(s.u, pack_for(s, bottom, params)));
  return out;
}

double energy_identity_residual(const Trajectory& traj, const std::vector<Forcing>& forcing,
                                const BottomProfile& bottom, const ExtensionParams& params) {
  if (traj.states.empty()) throw ConfigError("energy_identity_residual: empty trajectory");
  if (forcing.size() != traj.states.size())
    throw ConfigError("energy_identity_residual: forcing must have one entry per time node");
  const double dt = traj.time.dt;

  const GeometryPack first = pack_for(traj.states.front(), bottom, params);
  const SlabVector& u0 = traj.states.front().u;
  double lhs = 0.0;
  double rhs = 0.5 * weighted_dot(first.J, u0, u0);
  for (std::size_t n = 1; n < traj.states.size(); ++n) {
    const FlowState& s = traj.states[n];
    const GeometryPack pack = pack_for(s, bottom, params);
    lhs += 0.5 * dt * weighted_tensor_square(pack.J, sym_grad_A(pack, s.u));
    rhs += 0.5 * dt * weighted_dot(pack.dt->J_t, s.u, s.u);
    rhs += dt * weighted_dot(pack.J, forcing[n].F, s.u);
    rhs -= dt * surface_dot(forcing[n].H, top_trace(s.u));
    if (n + 1 == traj.states.size()) lhs += 0.5 * weighted_dot(pack.J, s.u, s.u);
  }
  if (traj.states.size() == 1) lhs = rhs;
  return std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), kEnergyFloor});
}

double korn_ratio(const GeometryPack& pack, const SlabVector& u) {
  const double den = std::pow(sobolev_norm_slab(u, 1), 2);
  if (den == 0.0) throw ConfigError("korn_ratio: zero trial field");
  return weighted_tensor_square(pack.J, sym_grad_A(pack, u)) / den;
}

std::pair<double, double> norm_equivalence_ratios(const GeometryPack& pack, int samples, std::uint64_t seed) {
  if (samples < 10) throw ConfigError("norm_equivalence_ratios: samples must be at least 10");
  TrialRng rng(seed);
  std::vector<SlabVector> trials;
  std::vector<SlabTensor> sym;
  for (int s = 0; s < samples; ++s) {
    trials.push_back(random_clamped_vector(pack.grid(), rng, 3));
    sym.push_back(sym_grad_A(pack, trials.back()));
  }
  // Rayleigh-Ritz on the span of the trials: extreme generalized eigenvalues of
  // the Gram matrices bracket every individual ratio.
  Eigen::MatrixXd a(samples, samples), b(samples, samples);
  for (int i = 0; i < samples; ++i)
    for (int j = 0; j <= i; ++j) {
      SlabField sum(pack.grid());
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) sum += multiply(sym[i][r][c], sym[j][r][c]);
      a(i, j) = a(j, i) = integrate(multiply(pack.J, sum));
      const double plus = sobolev_norm_slab(trials[i] + trials[j], 1);
      const double minus = sobolev_norm_slab(trials[i] - trials[j], 1);
      b(i, j) = b(j, i) = 0.25 * (plus * plus - minus * minus);
    }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(a, b, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw SolverError("norm_equivalence_ratios: trial Gram matrix is singular");
  return {es.eigenvalues()(0), es.eigenvalues()(samples - 1)};
}

std::vector<ScalingPoint> epsilon_scaling_study(const GridPtr& grid, double eps_min, double eps_max, int points) {
  if (!(eps_min > 0.0) || !(eps_max > eps_min) || points < 2)
    throw ConfigError("epsilon_scaling_study: need 0 < eps_min < eps_max and at least 2 points");
  const double L1 = grid->spec().L1;
  const auto f = SurfaceField::from_function(grid, [L1](double x1, double) { return std::cos(2 * kPi * x1 / L1); });
  std::vector<ScalingPoint> out;
  for (int n = 0; n < points; ++n) {
    const double eps = eps_min * std::pow(eps_max / eps_min, static_cast<double>(n) / (points - 1));
    out.push_back({eps, vertical_derivative(poisson_extend(f, eps)).max_abs()});
  }
  return out;
}

double scaling_slope(const std::vector<ScalingPoint>& pts) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(pts.size());
  for (const auto& p : pts) {
    const double x = std::log(p.epsilon), y = std::log(p.sup_dz);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

LemmaChecks run_lemma_suite(const ExtensionParams& params, const LemmaSuiteOptions& opts) {
  opts.grid.validate();
  LemmaChecks out;
  identity_checks(out, "", opts.grid, opts, params);
  GridSpec coarse = opts.grid;
  if (coarse.N1 >= 8 && coarse.N2 >= 8 && coarse.N1 % 4 == 0 && coarse.N2 % 4 == 0) {
    coarse.N1 /= 2;
    coarse.N2 /= 2;
    std::ostringstream suffix;
    suffix << "@" << coarse.N1 << "x" << coarse.N2 << "x" << coarse.Nz;
    identity_checks(out, suffix.str(), coarse, opts, params);
  }
  const auto g = Grid::create(opts.grid);
  extension_checks(out, g, opts);
  transport_check(out, g, opts);
  return out;
}

bool identities_pass(const LemmaChecks& checks) {
  return std::all_of(checks.begin(), checks.end(),
                     [](const auto& kv) { return kv.second.kind != "identity" || kv.second.pass; });
}

bool all_pass(const LemmaChecks& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const auto& kv) { return kv.second.pass; });
}

DiagnosticsReport diagnose(const PicardResult& result, const InitialData& data, int korn_samples,
                           std::uint64_t seed) {
  DiagnosticsReport r;
  const Trajectory& traj = result.traj;
  r.energy_residual = energy_identity_residual(traj, trajectory_forcing(traj, data.bottom, data.params),
                                               data.bottom, data.params);
  r.min_J = std::numeric_limits<double>::infinity();
  for (const auto& s : traj.states) r.min_J = std::min(r.min_J, min_jacobian(s.eta, data.bottom, data.params.epsilon));
  for (const auto& st : traj.steps) {
    r.div_residual = std::max(r.div_residual, st.divergence);
    r.bottom_slip = std::max(r.bottom_slip, st.bottom_slip);
  }
  const GeometryPack pack0 = build_geometry(data.eta0, data.deta_dt0, data.bottom, data.params);
  r.norm_equiv_ratios = norm_equivalence_ratios(pack0, korn_samples, seed);
  if (traj.states.size() >= 2) r.functionals = functionals(traj);
  return r;
}

}  // namespace slabflow
