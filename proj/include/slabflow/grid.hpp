#pragma once

// Discrete function spaces on the slab (L1 T) x (L2 T) x [-b0, 0]:
// Fourier in the horizontal directions, Chebyshev-Gauss-Lobatto collocation
// in x3. Index k = 0 is the surface x3 = 0, k = Nz-1 is the bottom x3 = -b0.

#include <array>
#include <complex>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace slabflow {

using cplx = std::complex<double>;

struct GridSpec {
  double L1 = 1.0;
  double L2 = 1.0;
  double b0 = 1.0;
  int N1 = 16;
  int N2 = 16;
  int Nz = 17;
  bool dealias = true;

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
};

bool operator==(const GridSpec& a, const GridSpec& b);

class Grid;
using GridPtr = std::shared_ptr<const Grid>;

/// Immutable grid: nodes, wavenumbers, Chebyshev operators, quadrature and FFT plans.
class Grid {
 public:
  static GridPtr create(const GridSpec& spec);
  ~Grid();
  Grid(const Grid&) = delete;
  Grid& operator=(const Grid&) = delete;

  const GridSpec& spec() const { return spec_; }
  int n1() const { return spec_.N1; }
  int n2() const { return spec_.N2; }
  int nz() const { return spec_.Nz; }
  /// Half-spectrum width along x2 (r2c layout).
  int m2() const { return spec_.N2 / 2 + 1; }
  std::size_t layer_size() const { return static_cast<std::size_t>(spec_.N1) * spec_.N2; }
  std::size_t spectral_layer_size() const { return static_cast<std::size_t>(spec_.N1) * m2(); }

  double x1(int i) const { return spec_.L1 * i / spec_.N1; }
  double x2(int j) const { return spec_.L2 * j / spec_.N2; }
  double x3(int k) const { return x3_[k]; }
  std::span<const double> x3_nodes() const { return x3_; }

  /// Signed integer mode index of spectral row i (0..N1-1) / column j (0..N2/2).
  int mode1(int i) const { return i <= spec_.N1 / 2 ? i : i - spec_.N1; }
  int mode2(int j) const { return j; }
  /// Frequency n_j = m_j / L_j; the Nyquist row is reported as +N/2.
  double freq1(int i) const { return mode1(i) / spec_.L1; }
  double freq2(int j) const { return mode2(j) / spec_.L2; }
  /// Derivative wavenumber 2 pi n_j, zero on the Nyquist mode.
  double kx1(int i) const;
  double kx2(int j) const;
  /// |n| for the (i, j) half-spectrum entry.
  double freq_abs(int i, int j) const;
  /// Weight of entry (i, j) when summing over the full spectrum from the half one.
  double hermitian_weight(int j) const;
  bool is_nyquist(int i, int j) const { return i == spec_.N1 / 2 || j == spec_.N2 / 2; }
  /// True when the mode survives the 2/3 truncation.
  bool below_dealias_cutoff(int i, int j) const;

  /// Chebyshev differentiation matrices in x3 (already scaled to [-b0, 0]).
  const Eigen::MatrixXd& dz() const { return dz_; }
  const Eigen::MatrixXd& dzz() const { return dzz_; }
  /// Clenshaw-Curtis weights on [-b0, 0].
  std::span<const double> cc_weights() const { return ccw_; }

  /// One-layer transforms; forward is normalised so f_hat(n) = mean(f e^{-2 pi i n x}).
  void forward(std::span<const double> in, std::span<cplx> out) const;
  void inverse(std::span<const cplx> in, std::span<double> out) const;

 private:
  explicit Grid(const GridSpec& spec);

  GridSpec spec_;
  std::vector<double> x3_;
  std::vector<double> ccw_;
  Eigen::MatrixXd dz_;
  Eigen::MatrixXd dzz_;
  void* plan_fwd_ = nullptr;
  void* plan_inv_ = nullptr;
};

/// Real function on the horizontal torus.
class SurfaceField {
 public:
  SurfaceField() = default;
  explicit SurfaceField(GridPtr grid, double value = 0.0);
  static SurfaceField from_function(GridPtr grid, const std::function<double(double, double)>& f);

  const GridPtr& grid() const { return grid_; }
  double& operator()(int i, int j) { return v_[static_cast<std::size_t>(i) * grid_->n2() + j]; }
  double operator()(int i, int j) const { return v_[static_cast<std::size_t>(i) * grid_->n2() + j]; }
  std::span<double> values() { return v_; }
  std::span<const double> values() const { return v_; }
  bool empty() const { return !grid_; }

  double max_abs() const;
  double min() const;
  double max() const;
  double mean() const;

  SurfaceField& operator+=(const SurfaceField& o);
  SurfaceField& operator-=(const SurfaceField& o);
  SurfaceField& operator*=(double a);

 private:
  GridPtr grid_;
  std::vector<double> v_;
};

/// Real function on the slab, stored layer by layer (layer k at height x3(k)).
class SlabField {
 public:
  SlabField() = default;
  explicit SlabField(GridPtr grid, double value = 0.0);
  static SlabField from_function(GridPtr grid,
                                 const std::function<double(double, double, double)>& f);
  /// Field depending on x3 only.
  static SlabField from_profile(GridPtr grid, const std::function<double(double)>& f);

  const GridPtr& grid() const { return grid_; }
  double& operator()(int k, int i, int j) { return v_[index(k, i, j)]; }
  double operator()(int k, int i, int j) const { return v_[index(k, i, j)]; }
  std::span<double> values() { return v_; }
  std::span<const double> values() const { return v_; }
  std::span<double> layer(int k);
  std::span<const double> layer(int k) const;
  bool empty() const { return !grid_; }

  SurfaceField trace(int k) const;
  SurfaceField top() const { return trace(0); }
  SurfaceField bottom() const { return trace(grid_->nz() - 1); }
  void set_layer(int k, const SurfaceField& s);

  double max_abs() const;
  double min() const;

  SlabField& operator+=(const SlabField& o);
  SlabField& operator-=(const SlabField& o);
  SlabField& operator*=(double a);

 private:
  std::size_t index(int k, int i, int j) const {
    return (static_cast<std::size_t>(k) * grid_->n1() + i) * grid_->n2() + j;
  }
  GridPtr grid_;
  std::vector<double> v_;
};

using SlabVector = std::array<SlabField, 3>;
using SurfaceVector = std::array<SurfaceField, 3>;

SurfaceField operator+(SurfaceField a, const SurfaceField& b);
SurfaceField operator-(SurfaceField a, const SurfaceField& b);
SurfaceField operator*(double s, SurfaceField a);
SlabField operator+(SlabField a, const SlabField& b);
SlabField operator-(SlabField a, const SlabField& b);
SlabField operator*(double s, SlabField a);

SlabVector zero_vector(const GridPtr& grid);
SurfaceVector zero_surface_vector(const GridPtr& grid);
SlabVector operator+(const SlabVector& a, const SlabVector& b);
SlabVector operator-(const SlabVector& a, const SlabVector& b);
SlabVector operator*(double s, const SlabVector& a);
double max_abs(const SlabVector& v);
double max_abs(const SurfaceVector& v);
SurfaceVector top_trace(const SlabVector& v);
SurfaceVector bottom_trace(const SlabVector& v);

/// Half-spectrum coefficients (N1 x (N2/2+1)) of a surface field.
struct SurfaceSpectrum {
  GridPtr grid;
  std::vector<cplx> c;
  cplx& at(int i, int j) { return c[static_cast<std::size_t>(i) * grid->m2() + j]; }
  cplx at(int i, int j) const { return c[static_cast<std::size_t>(i) * grid->m2() + j]; }
  /// Coefficient of signed mode (m1, m2), using Hermitian symmetry when m2 < 0.
  cplx mode(int m1, int m2) const;
};

/// Per-layer half spectra of a slab field.
struct SlabSpectrum {
  GridPtr grid;
  std::vector<cplx> c;
  cplx& at(int k, int i, int j) {
    return c[(static_cast<std::size_t>(k) * grid->n1() + i) * grid->m2() + j];
  }
  cplx at(int k, int i, int j) const {
    return c[(static_cast<std::size_t>(k) * grid->n1() + i) * grid->m2() + j];
  }
};

SurfaceSpectrum to_spectral(const SurfaceField& f);
SurfaceField to_physical(const SurfaceSpectrum& s);
SlabSpectrum to_spectral(const SlabField& f);
SlabField to_physical(const SlabSpectrum& s);

/// Spectral derivative along axis 1 or 2 (multiplier 2 pi i n_axis).
SurfaceField horizontal_derivative(const SurfaceField& f, int axis);
SlabField horizontal_derivative(const SlabField& f, int axis);
/// Both horizontal derivatives from a single forward transform.
std::array<SlabField, 2> horizontal_gradient(const SlabField& f);
std::array<SurfaceField, 2> horizontal_gradient(const SurfaceField& f);
/// Chebyshev collocation derivative along x3.
SlabField vertical_derivative(const SlabField& f);

/// Zero every mode with |m_j| > N_j / 3.
SurfaceField dealias(const SurfaceField& f);
SlabField dealias(const SlabField& f);
/// Pointwise product, 2/3-truncated afterwards when dealias_result is set.
SurfaceField multiply(const SurfaceField& f, const SurfaceField& g, bool dealias_result = false);
SlabField multiply(const SlabField& f, const SlabField& g, bool dealias_result = false);

/// Trapezoid integral over the torus (exact for resolved trigonometric polynomials).
double integrate(const SurfaceField& f);
/// Trapezoid in x' times Clenshaw-Curtis in x3.
double integrate(const SlabField& f);

/// ||f||_{H^s}^2 = sum_n (1 + |2 pi n|^2)^s |f_hat(n)|^2 L1 L2, returned as the root.
double sobolev_norm_surface(const SurfaceField& f, double s);
/// Homogeneous variant sum_n |2 pi n|^{2s} |f_hat(n)|^2 L1 L2 (zero mode dropped).
double homogeneous_norm_surface(const SurfaceField& f, double s);
/// ||f||_{H^k}^2 = sum over multi-indices |alpha| <= k of int |d^alpha f|^2.
double sobolev_norm_slab(const SlabField& f, int k);
double sobolev_norm_slab(const SlabVector& f, int k);

void require_same_grid(const GridPtr& a, const GridPtr& b, const char* where);

}  // namespace slabflow
