#include "slabflow/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <mutex>
#include <sstream>

#include "slabflow/error.hpp"
#include "slabflow/parallel.hpp"

namespace slabflow {

namespace {

using Eigen::MatrixXd;

double interior_max_abs(const SlabField& f) {
  const int nz = f.grid()->nz();
  double m = 0.0;
  for (int k = 1; k < nz - 1; ++k)
    for (double v : f.layer(k)) m = std::max(m, std::abs(v));
  return m;
}

double interior_max_abs(const SlabVector& v) {
  return std::max({interior_max_abs(v[0]), interior_max_abs(v[1]), interior_max_abs(v[2])});
}

MatrixXd build_pressure_interpolation(const Grid& g) {
  const int nz = g.nz();
  const int m = nz - 2;
  // Nodes rescaled to [-1, 1] keep the barycentric weights in range.
  const double b0 = g.spec().b0;
  std::vector<double> x(nz);
  for (int k = 0; k < nz; ++k) x[k] = 1.0 + 2.0 * g.x3(k) / b0;
  std::vector<double> w(m, 1.0);
  for (int a = 0; a < m; ++a)
    for (int c = 0; c < m; ++c)
      if (a != c) w[a] /= x[a + 1] - x[c + 1];
  MatrixXd P = MatrixXd::Zero(nz, m);
  for (int k = 0; k < nz; ++k) {
    if (k >= 1 && k <= m) {
      P(k, k - 1) = 1.0;
      continue;
    }
    double denom = 0.0;
    for (int a = 0; a < m; ++a) denom += w[a] / (x[k] - x[a + 1]);
    for (int a = 0; a < m; ++a) P(k, a) = w[a] / (x[k] - x[a + 1]) / denom;
  }
  return P;
}

struct PressureBasis {
  MatrixXd P;
  MatrixXd DP;
};

std::shared_ptr<const PressureBasis> pressure_basis(const GridPtr& grid) {
  static std::mutex mu;
  static std::deque<std::pair<GridPtr, std::shared_ptr<const PressureBasis>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  for (auto& [g, b] : cache)
    if (g == grid) return b;
  auto basis = std::make_shared<PressureBasis>();
  basis->P = build_pressure_interpolation(*grid);
  basis->DP = grid->dz() * basis->P;
  cache.emplace_back(grid, basis);
  if (cache.size() > 8) cache.pop_front();
  return basis;
}

std::string mode_label(const Grid& g, int i, int j) {
  std::ostringstream os;
  os << "(" << g.mode1(i) << ", " << g.mode2(j) << ")";
  return os.str();
}

// Per-mode horizontal wavenumbers as seen by the derivative operators.
struct ModeWave {
  double k1, k2;
};

ModeWave wave(const Grid& g, std::size_t mode) {
  const int i = static_cast<int>(mode / g.m2());
  const int j = static_cast<int>(mode % g.m2());
  return {g.kx1(i), g.kx2(j)};
}

// Relative-or-absolute scale: data magnitude, or 1 when the data vanish.
double safe_scale(double s) { return s > 0.0 ? s : 1.0; }

}  // namespace

const Eigen::MatrixXd& pressure_interpolation(const GridPtr& grid) {
  return pressure_basis(grid)->P;
}

// ------------------------------------------------------------------ RHS and operator

StokesRHS StokesRHS::zero(const GridPtr& grid) {
  return {zero_vector(grid), SlabField(grid), zero_surface_vector(grid)};
}

double StokesResidual::relative() const {
  return std::max({momentum, divergence, traction, bottom}) / safe_scale(scale);
}

GeometryPack flat_geometry(const GridPtr& grid) {
  ExtensionParams p;
  p.epsilon = 1.0;
  return build_geometry(SurfaceField(grid), SurfaceField(grid), BottomProfile::flat(grid), p);
}

StokesOperatorValue apply_stokes_operator(const GeometryPack& pack, const SlabVector& u,
                                          const SlabField& p, double sigma) {
  require_same_grid(pack.grid(), u[0].grid(), "apply_stokes_operator");
  require_same_grid(pack.grid(), p.grid(), "apply_stokes_operator");
  const std::array<SlabVector, 3> grads = {grad_A(pack, u[0]), grad_A(pack, u[1]),
                                           grad_A(pack, u[2])};
  const SlabVector gp = grad_A(pack, p);
  StokesOperatorValue out;
  for (int i = 0; i < 3; ++i) {
    out.momentum[i] = sigma * u[i] - div_A(pack, grads[i]) + gp[i];
  }
  out.divergence = grads[0][0] + grads[1][1] + grads[2][2];
  SlabTensor s;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      s[i][j] = -1.0 * (grads[j][i] + grads[i][j]);
      if (i == j) s[i][j] += p;
    }
  out.traction = surface_traction(s, pack.Ntop);
  return out;
}

StokesResidual stokes_residual(const GeometryPack& pack, const StokesRHS& rhs,
                               const SlabVector& u, const SlabField& p, double sigma) {
  const auto op = apply_stokes_operator(pack, u, p, sigma);
  StokesResidual r;
  r.momentum = interior_max_abs(op.momentum - rhs.F);
  r.divergence = interior_max_abs(op.divergence - rhs.G);
  SurfaceVector dt = op.traction;
  for (int i = 0; i < 3; ++i) dt[i] -= rhs.H[i];
  r.traction = max_abs(dt);
  r.bottom = max_abs(bottom_trace(u));
  r.scale = std::max({interior_max_abs(rhs.F), interior_max_abs(rhs.G), max_abs(rhs.H)});
  return r;
}

// ------------------------------------------------------------------ flat Stokes kernel
//
// Unknown ordering per mode: u1, u2, u3 at all Nz nodes, then pressure at the
// Nz-2 interior nodes. Writing u1 = i v1, u2 = i v2 makes the block real; the
// horizontal-momentum and horizontal-stress rows are divided by i to match.

struct FlatStokesSolver::Impl {
  std::vector<Eigen::PartialPivLU<MatrixXd>> lu;
  std::shared_ptr<const PressureBasis> basis;
};

FlatStokesSolver::FlatStokesSolver(GridPtr grid, double sigma)
    : grid_(std::move(grid)), sigma_(sigma), impl_(std::make_unique<Impl>()) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("flat Stokes: sigma must be >= 0");
  const Grid& g = *grid_;
  const int nz = g.nz();
  const int np = nz - 2;
  const int size = 3 * nz + np;
  impl_->basis = pressure_basis(grid_);
  const MatrixXd& D = g.dz();
  const MatrixXd& D2 = g.dzz();
  const MatrixXd& P = impl_->basis->P;
  const MatrixXd& DP = impl_->basis->DP;
  const std::size_t modes = g.spectral_layer_size();
  impl_->lu.resize(modes);
  std::vector<double> rc(modes, 1.0);

  parallel_for(modes, [&](std::size_t mode) {
    const auto [k1, k2] = wave(g, mode);
    const double kk = k1 * k1 + k2 * k2;
    MatrixXd A = MatrixXd::Zero(size, size);
    const int pc = 3 * nz;
    for (int c = 0; c < 3; ++c) {
      const int off = c * nz;
      for (int k = 1; k < nz - 1; ++k) {
        const int row = off + k;
        A.block(row, off, 1, nz) = -D2.row(k);
        A(row, off + k) += sigma_ + kk;
        if (c == 0) A.block(row, pc, 1, np) = k1 * P.row(k);
        if (c == 1) A.block(row, pc, 1, np) = k2 * P.row(k);
        if (c == 2) A.block(row, pc, 1, np) = DP.row(k);
      }
      A(off + nz - 1, off + nz - 1) = 1.0;
    }
    // Surface stress rows.
    A.block(0, 0, 1, nz) = -D.row(0);
    A(0, 2 * nz) += -k1;
    A.block(nz, nz, 1, nz) = -D.row(0);
    A(nz, 2 * nz) += -k2;
    A.block(2 * nz, 2 * nz, 1, nz) = -2.0 * D.row(0);
    A.block(2 * nz, pc, 1, np) = P.row(0);
    // Divergence rows at interior nodes.
    for (int k = 1; k < nz - 1; ++k) {
      const int row = pc + k - 1;
      A(row, k) = -k1;
      A(row, nz + k) = -k2;
      A.block(row, 2 * nz, 1, nz) = D.row(k);
    }
    impl_->lu[mode].compute(A);
    rc[mode] = impl_->lu[mode].rcond();
  });

  min_rcond_ = *std::min_element(rc.begin(), rc.end());
  for (std::size_t mode = 0; mode < modes; ++mode) {
    if (!(rc[mode] > 1e-14)) {
      const int i = static_cast<int>(mode / g.m2());
      const int j = static_cast<int>(mode % g.m2());
      throw SolverError("flat Stokes block singular at mode n = " + mode_label(g, i, j));
    }
  }
}

FlatStokesSolver::~FlatStokesSolver() = default;

std::shared_ptr<const FlatStokesSolver> FlatStokesSolver::shared(const GridPtr& grid,
                                                                 double sigma) {
  static std::mutex mu;
  static std::deque<std::shared_ptr<const FlatStokesSolver>> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    for (auto& s : cache)
      if (s->grid_ == grid && s->sigma_ == sigma) return s;
  }
  auto made = std::make_shared<const FlatStokesSolver>(grid, sigma);
  std::lock_guard<std::mutex> lock(mu);
  cache.push_back(made);
  if (cache.size() > 6) cache.pop_front();
  return made;
}

StokesSolution FlatStokesSolver::solve(const StokesRHS& rhs) const {
  for (int c = 0; c < 3; ++c) {
    require_same_grid(grid_, rhs.F[c].grid(), "flat Stokes");
    require_same_grid(grid_, rhs.H[c].grid(), "flat Stokes");
  }
  require_same_grid(grid_, rhs.G.grid(), "flat Stokes");
  const Grid& g = *grid_;
  const int nz = g.nz();
  const int np = nz - 2;
  const int size = 3 * nz + np;
  const std::array<SlabSpectrum, 3> F = {to_spectral(rhs.F[0]), to_spectral(rhs.F[1]),
                                         to_spectral(rhs.F[2])};
  const SlabSpectrum G = to_spectral(rhs.G);
  const std::array<SurfaceSpectrum, 3> H = {to_spectral(rhs.H[0]), to_spectral(rhs.H[1]),
                                            to_spectral(rhs.H[2])};
  std::array<SlabSpectrum, 3> U = {SlabSpectrum{grid_, std::vector<cplx>(F[0].c.size())},
                                   SlabSpectrum{grid_, std::vector<cplx>(F[0].c.size())},
                                   SlabSpectrum{grid_, std::vector<cplx>(F[0].c.size())}};
  SlabSpectrum Pr{grid_, std::vector<cplx>(F[0].c.size())};
  const MatrixXd& P = impl_->basis->P;
  const cplx I(0.0, 1.0);

  parallel_for(g.spectral_layer_size(), [&](std::size_t mode) {
    const int i = static_cast<int>(mode / g.m2());
    const int j = static_cast<int>(mode % g.m2());
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(size);
    for (int k = 1; k < nz - 1; ++k) {
      b(k) = -I * F[0].at(k, i, j);
      b(nz + k) = -I * F[1].at(k, i, j);
      b(2 * nz + k) = F[2].at(k, i, j);
      b(3 * nz + k - 1) = G.at(k, i, j);
    }
    b(0) = -I * H[0].at(i, j);
    b(nz) = -I * H[1].at(i, j);
    b(2 * nz) = H[2].at(i, j);
    Eigen::MatrixX2d rhs2(size, 2);
    rhs2.col(0) = b.real();
    rhs2.col(1) = b.imag();
    const Eigen::MatrixX2d x = impl_->lu[mode].solve(rhs2);
    for (int k = 0; k < nz; ++k) {
      U[0].at(k, i, j) = I * cplx(x(k, 0), x(k, 1));
      U[1].at(k, i, j) = I * cplx(x(nz + k, 0), x(nz + k, 1));
      U[2].at(k, i, j) = cplx(x(2 * nz + k, 0), x(2 * nz + k, 1));
      cplx pk = 0.0;
      for (int a = 0; a < np; ++a) pk += P(k, a) * cplx(x(3 * nz + a, 0), x(3 * nz + a, 1));
      Pr.at(k, i, j) = pk;
    }
  });

  StokesSolution s;
  s.u = {to_physical(U[0]), to_physical(U[1]), to_physical(U[2])};
  s.p = to_physical(Pr);
  s.iterations = 1;
  return s;
}

StokesSolution solve_flat_stokes(const GridPtr& grid, const StokesRHS& rhs, double sigma) {
  auto solver = FlatStokesSolver::shared(grid, sigma);
  StokesSolution s = solver->solve(rhs);
  s.residual = stokes_residual(flat_geometry(grid), rhs, s.u, s.p, sigma).relative();
  return s;
}

// ------------------------------------------------------------------ A-Stokes

namespace {

// Replaces p by the degree Nz-3 interpolant of its interior values.
SlabField project_pressure(const SlabField& p) {
  const auto& g = p.grid();
  const MatrixXd& P = pressure_interpolation(g);
  const int nz = g->nz();
  SlabField out = p;
  for (int k : {0, nz - 1}) {
    auto layer = out.layer(k);
    for (std::size_t n = 0; n < layer.size(); ++n) {
      double v = 0.0;
      for (int a = 0; a < nz - 2; ++a) v += P(k, a) * p.layer(a + 1)[n];
      layer[n] = v;
    }
  }
  return out;
}

}  // namespace

StokesSolution solve_a_stokes(const GeometryPack& pack, const StokesRHS& rhs,
                              const EllipticOptions& opts,
                              const std::optional<StokesSolution>& guess) {
  if (!(opts.theta > 0.0 && opts.theta <= 1.0))
    throw ConfigError("A-Stokes: theta must lie in (0, 1]");
  if (opts.max_iter < 1) throw ConfigError("A-Stokes: max_iter must be positive");
  if (!(pack.min_J() > 0.0)) throw SolverError("A-Stokes: min J must be positive");
  const GridPtr& grid = pack.grid();
  auto flat = FlatStokesSolver::shared(grid, opts.sigma);

  StokesSolution sol;
  if (guess) {
    sol.u = guess->u;
    sol.p = project_pressure(guess->p);
    sol.iterations = 0;
  } else {
    sol = flat->solve(rhs);
  }

  double prev_update = std::numeric_limits<double>::infinity();
  int growth = 0;
  double log_ratio_sum = 0.0;
  int ratios = 0;
  while (true) {
    const auto op = apply_stokes_operator(pack, sol.u, sol.p, opts.sigma);
    StokesRHS defect{rhs.F - op.momentum, rhs.G - op.divergence, rhs.H};
    for (int i = 0; i < 3; ++i) defect.H[i] -= op.traction[i];
    StokesResidual r;
    r.momentum = interior_max_abs(defect.F);
    r.divergence = interior_max_abs(defect.G);
    r.traction = max_abs(defect.H);
    r.bottom = max_abs(bottom_trace(sol.u));
    r.scale = std::max({interior_max_abs(rhs.F), interior_max_abs(rhs.G), max_abs(rhs.H)});
    sol.residual = r.relative();
    if (!std::isfinite(sol.residual))
      throw SolverError("perturbation iteration divergent: surface too far from flat");
    if (sol.residual < opts.tol) break;
    if (sol.iterations >= opts.max_iter) {
      std::ostringstream os;
      os << "A-Stokes perturbation iteration reached max_iter = " << opts.max_iter
         << " with residual " << sol.residual;
      throw SolverError(os.str());
    }
    const StokesSolution corr = flat->solve(defect);
    const double update = opts.theta * std::max(max_abs(corr.u), corr.p.max_abs());
    for (int i = 0; i < 3; ++i) sol.u[i] += opts.theta * corr.u[i];
    sol.p += opts.theta * corr.p;
    ++sol.iterations;
    if (std::isfinite(prev_update) && prev_update > 0.0 && update > 0.0) {
      log_ratio_sum += std::log(update / prev_update);
      ++ratios;
    }
    growth = update > prev_update ? growth + 1 : 0;
    if (growth >= 3 || !std::isfinite(update))
      throw SolverError("perturbation iteration divergent: surface too far from flat");
    prev_update = update;
  }
  sol.contraction = ratios > 0 ? std::exp(log_ratio_sum / ratios) : 0.0;
  return sol;
}

double vertical_consistency_residual(const GeometryPack& pack, const StokesRHS& rhs,
                                     const StokesSolution& sol, double sigma) {
  const auto& g = pack.grid();
  // Coefficient of d33 in lap_A: (1 + A^2 + B^2) K^2.
  SlabField c33(g);
  for (std::size_t n = 0; n < c33.values().size(); ++n) {
    const double ak = pack.AK.values()[n], bk = pack.BK.values()[n], k = pack.K.values()[n];
    c33.values()[n] = ak * ak + bk * bk + k * k;
  }
  const SlabVector gp = grad_A(pack, sol.p);
  double worst = 0.0;
  double scale = 0.0;
  for (int i = 0; i < 3; ++i) {
    const SlabField direct = multiply(c33, vertical_derivative(vertical_derivative(sol.u[i])));
    const SlabField rest = lap_A(pack, sol.u[i]) - direct;
    // From the momentum row: c33 d33 u_i = sigma u_i + (grad_A p)_i - F_i - rest.
    const SlabField recovered = sigma * sol.u[i] + gp[i] - rhs.F[i] - rest;
    worst = std::max(worst, interior_max_abs(recovered - direct));
    scale = std::max(scale, interior_max_abs(direct));
  }
  return worst / safe_scale(scale);
}

// ------------------------------------------------------------------ A-Poisson

namespace {

// Per mode: (D2 - k^2) on interior rows, Dirichlet on top, -D on the bottom.
class FlatPoissonSolver {
 public:
  explicit FlatPoissonSolver(GridPtr grid) : grid_(std::move(grid)) {
    const Grid& g = *grid_;
    const int nz = g.nz();
    const std::size_t modes = g.spectral_layer_size();
    lu_.resize(modes);
    parallel_for(modes, [&](std::size_t mode) {
      const auto [k1, k2] = wave(g, mode);
      MatrixXd A = g.dzz();
      for (int k = 0; k < nz; ++k) A(k, k) -= k1 * k1 + k2 * k2;
      A.row(0).setZero();
      A(0, 0) = 1.0;
      A.row(nz - 1) = -g.dz().row(nz - 1);
      lu_[mode].compute(A);
    });
  }

  static std::shared_ptr<const FlatPoissonSolver> shared(const GridPtr& grid) {
    static std::mutex mu;
    static std::deque<std::shared_ptr<const FlatPoissonSolver>> cache;
    std::lock_guard<std::mutex> lock(mu);
    for (auto& s : cache)
      if (s->grid_ == grid) return s;
    cache.push_back(std::make_shared<const FlatPoissonSolver>(grid));
    if (cache.size() > 4) cache.pop_front();
    return cache.back();
  }

  SlabField solve(const SlabField& f, const SurfaceField& g, const SurfaceField& h) const {
    const Grid& gr = *grid_;
    const int nz = gr.nz();
    const SlabSpectrum F = to_spectral(f);
    const SurfaceSpectrum Gs = to_spectral(g);
    const SurfaceSpectrum Hs = to_spectral(h);
    SlabSpectrum out{grid_, std::vector<cplx>(F.c.size())};
    parallel_for(gr.spectral_layer_size(), [&](std::size_t mode) {
      const int i = static_cast<int>(mode / gr.m2());
      const int j = static_cast<int>(mode % gr.m2());
      Eigen::MatrixX2d b(nz, 2);
      for (int k = 1; k < nz - 1; ++k) b.row(k) << F.at(k, i, j).real(), F.at(k, i, j).imag();
      b.row(0) << Gs.at(i, j).real(), Gs.at(i, j).imag();
      b.row(nz - 1) << Hs.at(i, j).real(), Hs.at(i, j).imag();
      const Eigen::MatrixX2d x = lu_[mode].solve(b);
      for (int k = 0; k < nz; ++k) out.at(k, i, j) = cplx(x(k, 0), x(k, 1));
    });
    return to_physical(out);
  }

 private:
  GridPtr grid_;
  std::vector<Eigen::PartialPivLU<MatrixXd>> lu_;
};

SurfaceField bottom_flux(const SlabVector& v, const SurfaceVector& nu) {
  const auto b = bottom_trace(v);
  return multiply(b[0], nu[0]) + multiply(b[1], nu[1]) + multiply(b[2], nu[2]);
}

struct PoissonDefect {
  SlabField f;
  SurfaceField g, h;
  double value;
};

PoissonDefect poisson_defect(const GeometryPack& pack, const SurfaceVector& nu,
                             const SlabField& p, const SlabField& f, const SurfaceField& g,
                             const SurfaceField& h) {
  const SlabVector gp = grad_A(pack, p);
  PoissonDefect d{f - div_A(pack, gp), g - p.top(), h - bottom_flux(gp, nu), 0.0};
  const double scale =
      safe_scale(std::max({interior_max_abs(f), g.max_abs(), h.max_abs()}));
  d.value = std::max({interior_max_abs(d.f), d.g.max_abs(), d.h.max_abs()}) / scale;
  return d;
}

}  // namespace

double poisson_residual(const GeometryPack& pack, const SlabField& p, const SlabField& f,
                        const SurfaceField& g, const SurfaceField& h) {
  return poisson_defect(pack, bottom_normal(pack.bottom), p, f, g, h).value;
}

PoissonSolution solve_a_poisson(const GeometryPack& pack, const SlabField& f,
                                const SurfaceField& g, const SurfaceField& h,
                                const EllipticOptions& opts) {
  if (!(opts.theta > 0.0 && opts.theta <= 1.0))
    throw ConfigError("A-Poisson: theta must lie in (0, 1]");
  if (!(pack.min_J() > 0.0)) throw SolverError("A-Poisson: min J must be positive");
  const GridPtr& grid = pack.grid();
  require_same_grid(grid, f.grid(), "A-Poisson");
  require_same_grid(grid, g.grid(), "A-Poisson");
  require_same_grid(grid, h.grid(), "A-Poisson");
  auto flat = FlatPoissonSolver::shared(grid);
  const SurfaceVector nu = bottom_normal(pack.bottom);

  PoissonSolution sol;
  sol.p = flat->solve(f, g, h);
  sol.iterations = 1;
  double prev_update = std::numeric_limits<double>::infinity();
  int growth = 0;
  while (true) {
    PoissonDefect d = poisson_defect(pack, nu, sol.p, f, g, h);
    sol.residual = d.value;
    if (!std::isfinite(sol.residual))
      throw SolverError("perturbation iteration divergent: surface too far from flat");
    if (sol.residual < opts.tol) break;
    if (sol.iterations >= opts.max_iter) {
      std::ostringstream os;
      os << "A-Poisson perturbation iteration reached max_iter = " << opts.max_iter
         << " with residual " << sol.residual;
      throw SolverError(os.str());
    }
    const SlabField corr = flat->solve(d.f, d.g, d.h);
    const double update = opts.theta * corr.max_abs();
    sol.p += opts.theta * corr;
    ++sol.iterations;
    growth = update > prev_update ? growth + 1 : 0;
    if (growth >= 3)
      throw SolverError("perturbation iteration divergent: surface too far from flat");
    prev_update = update;
  }
  return sol;
}

PoissonSolution solve_a_poisson_divergence_form(const GeometryPack& pack, const SlabField& f0,
                                                const SlabVector& F0, const SurfaceField& g,
                                                const SurfaceField& h,
                                                const EllipticOptions& opts) {
  const SurfaceVector nu = bottom_normal(pack.bottom);
  return solve_a_poisson(pack, f0 - div_A(pack, F0), g, h - bottom_flux(F0, nu), opts);
}

}  // namespace slabflow
