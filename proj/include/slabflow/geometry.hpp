#pragma once

// Flattening of the moving fluid domain onto the fixed slab.
//
// The surface eta is lifted into the slab by the parameterized Poisson
// extension etabar = P^eps eta, whose mode n decays like exp(eps |n| x3) with
// |n| the plain frequency (no 2 pi). The map
//   Phi(x) = (x1, x2, b x3 / b0 + etabar (1 + x3 / b0))
// has Jacobian rows (1,0,0), (0,1,0), (A,B,J); every A-operator below is the
// Euclidean operator conjugated by Phi.

#include <optional>
#include <string>

#include "slabflow/grid.hpp"

namespace slabflow {

struct ExtensionParams {
  double epsilon = 1.0;
  double delta = 0.5;
  double c_poisson = 1.0;
};

struct BottomProfile {
  SurfaceField b;
  double b0 = 1.0;

  /// b = b0 everywhere.
  static BottomProfile flat(const GridPtr& grid);
  /// b = b0 (1 + amplitude cos(2 pi wavenumber x1 / L1)).
  static BottomProfile single_mode(const GridPtr& grid, double amplitude, int wavenumber);
};

using SlabTensor = std::array<std::array<SlabField, 3>, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

struct GeometryTimeDerivative {
  SurfaceField deta_dt;
  SlabField etabar_t;
  SlabField A_t, B_t, J_t, K_t;
  SurfaceVector Ntop_t;
};

/// Everything derived from (eta, d_t eta, b) at one time instant. Immutable once built.
struct GeometryPack {
  SurfaceField eta;
  SlabField etabar;
  SlabField etabar_dz;  // d3 etabar from the closed form eps |n| multiplier
  SlabField A, B, J, K;
  SlabField AK, BK;
  SlabField btilde;
  SurfaceVector Ntop;
  BottomProfile bottom;
  ExtensionParams params;
  std::optional<GeometryTimeDerivative> dt;

  const GridPtr& grid() const { return J.grid(); }
  bool has_time_derivative() const { return dt.has_value(); }

  /// Transform matrix with rows (1,0,-AK), (0,1,-BK), (0,0,K).
  Mat3 amat(int k, int i, int j) const;
  /// M = K grad(Phi) and its closed-form inverse J A^T.
  Mat3 mmat(int k, int i, int j) const;
  Mat3 mmat_inverse(int k, int i, int j) const;
  /// R = (d_t M) M^{-1}; requires a time derivative.
  Mat3 rmat(int k, int i, int j) const;

  double min_J() const;
};

/// Per-mode lift f_hat(n) exp(eps |n| x3).
SlabField poisson_extend(const SurfaceField& f, double epsilon);
/// d3 of the lift from the multiplier eps |n|, exact at every node.
SlabField poisson_extend_dz(const SurfaceField& f, double epsilon);

/// delta = min(eta0 + b) / (2 b0), eps = min(1, delta^2 / (4 C^2 ||eta0||_{5/2}^2)).
ExtensionParams choose_epsilon(const SurfaceField& eta0, const BottomProfile& bottom,
                               double c_poisson = 1.0);

/// Throws SolverError("degenerate flattening map ...") when min J <= 0.
GeometryPack build_geometry(const SurfaceField& eta, const std::optional<SurfaceField>& deta_dt,
                            const BottomProfile& bottom, const ExtensionParams& params);

/// Minimum of J = b/b0 + etabar/b0 + d3 etabar btilde without building the full pack.
double min_jacobian(const SurfaceField& eta, const BottomProfile& bottom, double epsilon);

// A-operators. Products are pointwise on the collocation grid.
SlabVector grad_A(const GeometryPack& g, const SlabField& f);
SlabField div_A(const GeometryPack& g, const SlabVector& v);
SlabField lap_A(const GeometryPack& g, const SlabField& f);
SlabVector lap_A(const GeometryPack& g, const SlabVector& u);
SlabTensor sym_grad_A(const GeometryPack& g, const SlabVector& u);
SlabTensor stress_A(const GeometryPack& g, const SlabField& p, const SlabVector& u);
/// Row-wise divergence (div_A S)_i = A_jk d_k S_ij.
SlabVector div_A(const GeometryPack& g, const SlabTensor& s);
/// S N evaluated on the surface layer.
SurfaceVector surface_traction(const SlabTensor& s, const SurfaceVector& normal);

/// Pointwise matrix-vector product with M, M^{-1} or R.
SlabVector apply_M(const GeometryPack& g, const SlabVector& w);
SlabVector apply_M_inverse(const GeometryPack& g, const SlabVector& v);
SlabVector apply_R(const GeometryPack& g, const SlabVector& v);

/// Unnormalised surface normal (-d1 eta, -d2 eta, 1).
SurfaceVector surface_normal(const SurfaceField& eta);
/// Pi0(v) = v - (v.N0) N0 / |N0|^2.
SurfaceVector project_tangent(const SurfaceVector& v, const SurfaceField& eta0);
/// Outward unit normal of the physical bottom y3 = -b(x').
SurfaceVector bottom_normal(const BottomProfile& bottom);

struct IdentityReport {
  double piola = 0.0;        // max_j max |d_k (J A_jk)|
  double jae3_top = 0.0;     // max |J A e3 - N| on the surface
  double jae3_bottom = 0.0;  // max |J A e3 - (d1 b, d2 b, 1)| on the bottom
  std::optional<double> r_identity;  // max |R^T N + d_t N| on the surface
};

IdentityReport verify_identities(const GeometryPack& pack);

}  // namespace slabflow
