#pragma once

// Stationary solvers on the slab.
//
// A-Stokes:   sigma u - lap_A u + grad_A p = F   (interior)
//             div_A u = G                        (interior)
//             (p I - D_A u) N = H                (x3 = 0)
//             u = 0                              (x3 = -b0)
// A-Poisson:  lap_A p = f, p = g on top, grad_A p . nu = h on the bottom.
//
// Both are solved by defect correction around the flat (A = I) operator,
// whose per-Fourier-mode blocks are factored once and cached. Velocity is
// collocated on all Chebyshev-Gauss-Lobatto nodes; pressure is the degree
// Nz-3 polynomial through the interior nodes, which removes the spurious
// pressure modes of equal-order collocation.

#include <memory>
#include <optional>

#include "slabflow/geometry.hpp"

namespace slabflow {

struct StokesRHS {
  SlabVector F;
  SlabField G;
  SurfaceVector H;

  static StokesRHS zero(const GridPtr& grid);
};

struct StokesSolution {
  SlabVector u;
  SlabField p;
  int iterations = 0;
  double residual = 0.0;     // relative, max over the four equations
  double contraction = 0.0;  // geometric mean of residual ratios over the sweeps
};

struct EllipticOptions {
  double tol = 1e-10;
  int max_iter = 60;
  double theta = 1.0;  // under-relaxation of the perturbation update
  double sigma = 0.0;  // mass coefficient (1/dt inside a backward-Euler step)
};

/// Residuals of the discrete A-Stokes equations, evaluated where they are collocated.
struct StokesResidual {
  double momentum = 0.0;
  double divergence = 0.0;
  double traction = 0.0;
  double bottom = 0.0;
  double scale = 0.0;  // data magnitude used for normalisation
  double relative() const;
};

/// Applies the discrete A-Stokes operator to (u, p).
struct StokesOperatorValue {
  SlabVector momentum;  // sigma u - lap_A u + grad_A p
  SlabField divergence;  // div_A u
  SurfaceVector traction;  // (p I - D_A u) N on the surface
};
StokesOperatorValue apply_stokes_operator(const GeometryPack& pack, const SlabVector& u,
                                          const SlabField& p, double sigma);

StokesResidual stokes_residual(const GeometryPack& pack, const StokesRHS& rhs,
                               const SlabVector& u, const SlabField& p, double sigma);

/// Flat geometry: eta = 0, b = b0, eps = 1.
GeometryPack flat_geometry(const GridPtr& grid);

/// Constant-coefficient solver; one factored block per horizontal mode.
class FlatStokesSolver {
 public:
  FlatStokesSolver(GridPtr grid, double sigma);
  ~FlatStokesSolver();
  FlatStokesSolver(const FlatStokesSolver&) = delete;
  FlatStokesSolver& operator=(const FlatStokesSolver&) = delete;

  /// Cached instance for (grid, sigma).
  static std::shared_ptr<const FlatStokesSolver> shared(const GridPtr& grid, double sigma);

  StokesSolution solve(const StokesRHS& rhs) const;
  double sigma() const { return sigma_; }
  /// Smallest reciprocal condition estimate over all mode blocks.
  double min_rcond() const { return min_rcond_; }

 private:
  struct Impl;
  GridPtr grid_;
  double sigma_;
  double min_rcond_ = 1.0;
  std::unique_ptr<Impl> impl_;
};

StokesSolution solve_flat_stokes(const GridPtr& grid, const StokesRHS& rhs, double sigma = 0.0);

/// Throws SolverError on divergence (update growing three sweeps in a row) or at max_iter.
StokesSolution solve_a_stokes(const GeometryPack& pack, const StokesRHS& rhs,
                              const EllipticOptions& opts = {},
                              const std::optional<StokesSolution>& guess = std::nullopt);

/// Recovers (1 + A^2 + B^2) K^2 d33 u_i from the momentum rows and compares it
/// with direct differentiation at interior nodes; relative mismatch.
double vertical_consistency_residual(const GeometryPack& pack, const StokesRHS& rhs,
                                     const StokesSolution& sol, double sigma = 0.0);

struct PoissonSolution {
  SlabField p;
  int iterations = 0;
  double residual = 0.0;
};

/// Strong form: lap_A p = f, p = g on the surface, grad_A p . nu = h on the bottom.
PoissonSolution solve_a_poisson(const GeometryPack& pack, const SlabField& f,
                                const SurfaceField& g, const SurfaceField& h,
                                const EllipticOptions& opts = {});

/// div_A(grad_A p + F0) = f0 with (grad_A p + F0) . nu = h on the bottom.
PoissonSolution solve_a_poisson_divergence_form(const GeometryPack& pack, const SlabField& f0,
                                                const SlabVector& F0, const SurfaceField& g,
                                                const SurfaceField& h,
                                                const EllipticOptions& opts = {});

/// Relative residual of the strong A-Poisson problem.
double poisson_residual(const GeometryPack& pack, const SlabField& p, const SlabField& f,
                        const SurfaceField& g, const SurfaceField& h);

/// Pressure interpolation from the Nz-2 interior nodes to all Nz nodes.
const Eigen::MatrixXd& pressure_interpolation(const GridPtr& grid);

}  // namespace slabflow
