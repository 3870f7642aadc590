#include "slabflow/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>

#include "slabflow/error.hpp"

namespace slabflow {

namespace {

constexpr double kPi = std::numbers::pi;

// FFTW planning is not thread-safe; execution on distinct arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

Eigen::MatrixXd chebyshev_matrix(int n_points) {
  const int n = n_points - 1;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n_points, n_points);
  auto c = [n](int j) { return ((j == 0 || j == n) ? 2.0 : 1.0) * ((j % 2) ? -1.0 : 1.0); };
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      if (i == j) continue;
      // x_i - x_j via the product formula, accurate near the endpoints.
      const double dx =
          2.0 * std::sin(kPi * (i + j) / (2.0 * n)) * std::sin(kPi * (j - i) / (2.0 * n));
      d(i, j) = c(i) / c(j) / dx;
    }
  }
  for (int i = 0; i <= n; ++i) {
    double s = 0.0;
    for (int j = 0; j <= n; ++j)
      if (j != i) s += d(i, j);
    d(i, i) = -s;
  }
  return d;
}

std::vector<double> clenshaw_curtis(int n_points) {
  const int n = n_points - 1;
  std::vector<double> w(n_points, 0.0);
  std::vector<double> v(std::max(n - 1, 0), 1.0);
  auto theta = [n](int k) { return kPi * k / n; };
  if (n % 2 == 0) {
    w[0] = w[n] = 1.0 / (n * n - 1.0);
    for (int k = 1; k < n / 2; ++k)
      for (int i = 1; i < n; ++i) v[i - 1] -= 2.0 * std::cos(2.0 * k * theta(i)) / (4.0 * k * k - 1.0);
    for (int i = 1; i < n; ++i) v[i - 1] -= std::cos(n * theta(i)) / (n * n - 1.0);
  } else {
    w[0] = w[n] = 1.0 / (static_cast<double>(n) * n);
    for (int k = 1; k <= (n - 1) / 2; ++k)
      for (int i = 1; i < n; ++i) v[i - 1] -= 2.0 * std::cos(2.0 * k * theta(i)) / (4.0 * k * k - 1.0);
  }
  for (int i = 1; i < n; ++i) w[i] = 2.0 * v[i - 1] / n;
  return w;
}

}  // namespace

void GridSpec::validate() const {
  std::ostringstream msg;
  if (!(L1 > 0) || !(L2 > 0)) msg << "L1 and L2 must be positive";
  else if (!(b0 > 0)) msg << "b0 must be positive";
  else if (N1 < 4 || N2 < 4) msg << "N1 and N2 must be at least 4";
  else if (N1 % 2 || N2 % 2) msg << (N1 % 2 ? "N1 must be even" : "N2 must be even");
  else if (Nz < 5) msg << "Nz must be at least 5";
  if (!msg.str().empty()) throw ConfigError("grid: " + msg.str());
}

bool operator==(const GridSpec& a, const GridSpec& b) {
  return a.L1 == b.L1 && a.L2 == b.L2 && a.b0 == b.b0 && a.N1 == b.N1 && a.N2 == b.N2 &&
         a.Nz == b.Nz && a.dealias == b.dealias;
}

GridPtr Grid::create(const GridSpec& spec) {
  spec.validate();
  return GridPtr(new Grid(spec));
}

Grid::Grid(const GridSpec& spec) : spec_(spec) {
  const int nz = spec.Nz;
  x3_.resize(nz);
  for (int k = 0; k < nz; ++k)
    x3_[k] = -(spec.b0 / 2.0) * (1.0 - std::cos(kPi * k / (nz - 1)));
  x3_[0] = 0.0;
  x3_[nz - 1] = -spec.b0;

  dz_ = chebyshev_matrix(nz) * (2.0 / spec.b0);
  dzz_ = dz_ * dz_;
  ccw_ = clenshaw_curtis(nz);
  for (double& w : ccw_) w *= spec.b0 / 2.0;

  std::vector<double> rbuf(layer_size());
  std::vector<cplx> cbuf(spectral_layer_size());
  auto* cptr = reinterpret_cast<fftw_complex*>(cbuf.data());
  std::lock_guard lock(planner_mutex());
  plan_fwd_ = fftw_plan_dft_r2c_2d(spec.N1, spec.N2, rbuf.data(), cptr,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
  plan_inv_ = fftw_plan_dft_c2r_2d(spec.N1, spec.N2, cptr, rbuf.data(),
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
}

Grid::~Grid() {
  std::lock_guard lock(planner_mutex());
  if (plan_fwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
  if (plan_inv_) fftw_destroy_plan(static_cast<fftw_plan>(plan_inv_));
}

double Grid::kx1(int i) const {
  return i == spec_.N1 / 2 ? 0.0 : 2.0 * kPi * mode1(i) / spec_.L1;
}

double Grid::kx2(int j) const {
  return j == spec_.N2 / 2 ? 0.0 : 2.0 * kPi * mode2(j) / spec_.L2;
}

double Grid::freq_abs(int i, int j) const { return std::hypot(freq1(i), freq2(j)); }

double Grid::hermitian_weight(int j) const {
  return (j == 0 || j == spec_.N2 / 2) ? 1.0 : 2.0;
}

bool Grid::below_dealias_cutoff(int i, int j) const {
  return 3 * std::abs(mode1(i)) <= spec_.N1 && 3 * std::abs(mode2(j)) <= spec_.N2 &&
         i != spec_.N1 / 2 && j != spec_.N2 / 2;
}

void Grid::forward(std::span<const double> in, std::span<cplx> out) const {
  std::vector<double> buf(in.begin(), in.end());
  fftw_execute_dft_r2c(static_cast<fftw_plan>(plan_fwd_), buf.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
  const double scale = 1.0 / static_cast<double>(layer_size());
  for (auto& c : out) c *= scale;
}

void Grid::inverse(std::span<const cplx> in, std::span<double> out) const {
  // c2r overwrites its input.
  std::vector<cplx> buf(in.begin(), in.end());
  fftw_execute_dft_c2r(static_cast<fftw_plan>(plan_inv_),
                       reinterpret_cast<fftw_complex*>(buf.data()), out.data());
}

void require_same_grid(const GridPtr& a, const GridPtr& b, const char* where) {
  if (!a || !b) throw ConfigError(std::string(where) + ": empty field");
  if (a != b && !(a->spec() == b->spec()))
    throw ConfigError(std::string(where) + ": grid dimension mismatch");
}

// ---------------------------------------------------------------- SurfaceField

SurfaceField::SurfaceField(GridPtr grid, double value)
    : grid_(std::move(grid)), v_(grid_->layer_size(), value) {}

SurfaceField SurfaceField::from_function(GridPtr grid,
                                         const std::function<double(double, double)>& f) {
  SurfaceField s(grid);
  for (int i = 0; i < grid->n1(); ++i)
    for (int j = 0; j < grid->n2(); ++j) s(i, j) = f(grid->x1(i), grid->x2(j));
  return s;
}

double SurfaceField::max_abs() const {
  double m = 0.0;
  for (double v : v_) m = std::max(m, std::abs(v));
  return m;
}
double SurfaceField::min() const { return *std::min_element(v_.begin(), v_.end()); }
double SurfaceField::max() const { return *std::max_element(v_.begin(), v_.end()); }
double SurfaceField::mean() const {
  double s = 0.0;
  for (double v : v_) s += v;
  return s / static_cast<double>(v_.size());
}

SurfaceField& SurfaceField::operator+=(const SurfaceField& o) {
  require_same_grid(grid_, o.grid_, "SurfaceField +=");
  for (std::size_t n = 0; n < v_.size(); ++n) v_[n] += o.v_[n];
  return *this;
}
SurfaceField& SurfaceField::operator-=(const SurfaceField& o) {
  require_same_grid(grid_, o.grid_, "SurfaceField -=");
  for (std::size_t n = 0; n < v_.size(); ++n) v_[n] -= o.v_[n];
  return *this;
}
SurfaceField& SurfaceField::operator*=(double a) {
  for (double& v : v_) v *= a;
  return *this;
}

SurfaceField operator+(SurfaceField a, const SurfaceField& b) { return a += b; }
SurfaceField operator-(SurfaceField a, const SurfaceField& b) { return a -= b; }
SurfaceField operator*(double s, SurfaceField a) { return a *= s; }

// ------------------------------------------------------------------- SlabField

SlabField::SlabField(GridPtr grid, double value)
    : grid_(std::move(grid)), v_(grid_->layer_size() * grid_->nz(), value) {}

SlabField SlabField::from_function(GridPtr grid,
                                   const std::function<double(double, double, double)>& f) {
  SlabField s(grid);
  for (int k = 0; k < grid->nz(); ++k)
    for (int i = 0; i < grid->n1(); ++i)
      for (int j = 0; j < grid->n2(); ++j) s(k, i, j) = f(grid->x1(i), grid->x2(j), grid->x3(k));
  return s;
}

SlabField SlabField::from_profile(GridPtr grid, const std::function<double(double)>& f) {
  SlabField s(grid);
  for (int k = 0; k < grid->nz(); ++k) {
    const double v = f(grid->x3(k));
    for (double& x : s.layer(k)) x = v;
  }
  return s;
}

std::span<double> SlabField::layer(int k) {
  return std::span<double>(v_).subspan(static_cast<std::size_t>(k) * grid_->layer_size(),
                                       grid_->layer_size());
}
std::span<const double> SlabField::layer(int k) const {
  return std::span<const double>(v_).subspan(static_cast<std::size_t>(k) * grid_->layer_size(),
                                             grid_->layer_size());
}

SurfaceField SlabField::trace(int k) const {
  SurfaceField s(grid_);
  auto l = layer(k);
  std::copy(l.begin(), l.end(), s.values().begin());
  return s;
}

void SlabField::set_layer(int k, const SurfaceField& s) {
  require_same_grid(grid_, s.grid(), "SlabField::set_layer");
  std::copy(s.values().begin(), s.values().end(), layer(k).begin());
}

double SlabField::max_abs() const {
  double m = 0.0;
  for (double v : v_) m = std::max(m, std::abs(v));
  return m;
}
double SlabField::min() const { return *std::min_element(v_.begin(), v_.end()); }

SlabField& SlabField::operator+=(const SlabField& o) {
  require_same_grid(grid_, o.grid_, "SlabField +=");
  for (std::size_t n = 0; n < v_.size(); ++n) v_[n] += o.v_[n];
  return *this;
}
SlabField& SlabField::operator-=(const SlabField& o) {
  require_same_grid(grid_, o.grid_, "SlabField -=");
  for (std::size_t n = 0; n < v_.size(); ++n) v_[n] -= o.v_[n];
  return *this;
}
SlabField& SlabField::operator*=(double a) {
  for (double& v : v_) v *= a;
  return *this;
}

SlabField operator+(SlabField a, const SlabField& b) { return a += b; }
SlabField operator-(SlabField a, const SlabField& b) { return a -= b; }
SlabField operator*(double s, SlabField a) { return a *= s; }

SlabVector zero_vector(const GridPtr& grid) {
  return {SlabField(grid), SlabField(grid), SlabField(grid)};
}
SurfaceVector zero_surface_vector(const GridPtr& grid) {
  return {SurfaceField(grid), SurfaceField(grid), SurfaceField(grid)};
}
SlabVector operator+(const SlabVector& a, const SlabVector& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
SlabVector operator-(const SlabVector& a, const SlabVector& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
SlabVector operator*(double s, const SlabVector& a) { return {s * a[0], s * a[1], s * a[2]}; }
double max_abs(const SlabVector& v) {
  return std::max({v[0].max_abs(), v[1].max_abs(), v[2].max_abs()});
}
double max_abs(const SurfaceVector& v) {
  return std::max({v[0].max_abs(), v[1].max_abs(), v[2].max_abs()});
}
SurfaceVector top_trace(const SlabVector& v) { return {v[0].top(), v[1].top(), v[2].top()}; }
SurfaceVector bottom_trace(const SlabVector& v) {
  return {v[0].bottom(), v[1].bottom(), v[2].bottom()};
}

// ------------------------------------------------------------------ transforms

cplx SurfaceSpectrum::mode(int m1, int m2) const {
  const int n1 = grid->n1();
  const int n2 = grid->n2();
  if (m2 < 0) return std::conj(mode(-m1, -m2));
  if (m2 > n2 / 2 || std::abs(m1) > n1 / 2) return 0.0;
  const int i = ((m1 % n1) + n1) % n1;
  return at(i, m2);
}

SurfaceSpectrum to_spectral(const SurfaceField& f) {
  const auto& g = f.grid();
  SurfaceSpectrum s{g, std::vector<cplx>(g->spectral_layer_size())};
  g->forward(f.values(), s.c);
  return s;
}

SurfaceField to_physical(const SurfaceSpectrum& s) {
  SurfaceField f(s.grid);
  s.grid->inverse(s.c, f.values());
  return f;
}

SlabSpectrum to_spectral(const SlabField& f) {
  const auto& g = f.grid();
  const std::size_t m = g->spectral_layer_size();
  SlabSpectrum s{g, std::vector<cplx>(m * g->nz())};
  for (int k = 0; k < g->nz(); ++k)
    g->forward(f.layer(k), std::span<cplx>(s.c).subspan(k * m, m));
  return s;
}

SlabField to_physical(const SlabSpectrum& s) {
  const auto& g = s.grid;
  const std::size_t m = g->spectral_layer_size();
  SlabField f(g);
  for (int k = 0; k < g->nz(); ++k)
    g->inverse(std::span<const cplx>(s.c).subspan(k * m, m), f.layer(k));
  return f;
}

namespace {

template <class Spectrum>
void apply_multiplier(Spectrum& s, int layers, const std::function<cplx(int, int)>& mult) {
  const auto& g = s.grid;
  const std::size_t m = g->spectral_layer_size();
  for (int i = 0; i < g->n1(); ++i)
    for (int j = 0; j < g->m2(); ++j) {
      const cplx factor = mult(i, j);
      for (int k = 0; k < layers; ++k) s.c[k * m + i * g->m2() + j] *= factor;
    }
}

cplx derivative_multiplier(const Grid& g, int axis, int i, int j) {
  return cplx(0.0, axis == 1 ? g.kx1(i) : g.kx2(j));
}

void check_axis(int axis) {
  if (axis != 1 && axis != 2) throw ConfigError("horizontal_derivative: axis must be 1 or 2");
}

}  // namespace

SurfaceField horizontal_derivative(const SurfaceField& f, int axis) {
  check_axis(axis);
  auto s = to_spectral(f);
  const Grid& g = *f.grid();
  apply_multiplier(s, 1, [&](int i, int j) { return derivative_multiplier(g, axis, i, j); });
  return to_physical(s);
}

SlabField horizontal_derivative(const SlabField& f, int axis) {
  check_axis(axis);
  auto s = to_spectral(f);
  const Grid& g = *f.grid();
  apply_multiplier(s, g.nz(), [&](int i, int j) { return derivative_multiplier(g, axis, i, j); });
  return to_physical(s);
}

std::array<SlabField, 2> horizontal_gradient(const SlabField& f) {
  const auto s = to_spectral(f);
  const Grid& g = *f.grid();
  auto s1 = s;
  auto s2 = s;
  apply_multiplier(s1, g.nz(), [&](int i, int j) { return derivative_multiplier(g, 1, i, j); });
  apply_multiplier(s2, g.nz(), [&](int i, int j) { return derivative_multiplier(g, 2, i, j); });
  return {to_physical(s1), to_physical(s2)};
}

std::array<SurfaceField, 2> horizontal_gradient(const SurfaceField& f) {
  const auto s = to_spectral(f);
  const Grid& g = *f.grid();
  auto s1 = s;
  auto s2 = s;
  apply_multiplier(s1, 1, [&](int i, int j) { return derivative_multiplier(g, 1, i, j); });
  apply_multiplier(s2, 1, [&](int i, int j) { return derivative_multiplier(g, 2, i, j); });
  return {to_physical(s1), to_physical(s2)};
}

SlabField vertical_derivative(const SlabField& f) {
  const auto& g = f.grid();
  const int nz = g->nz();
  const std::size_t ls = g->layer_size();
  const Eigen::MatrixXd& d = g->dz();
  SlabField out(g);
  auto in = f.values();
  auto res = out.values();
  for (int k = 0; k < nz; ++k) {
    double* dst = res.data() + k * ls;
    for (int l = 0; l < nz; ++l) {
      const double c = d(k, l);
      const double* src = in.data() + l * ls;
      for (std::size_t n = 0; n < ls; ++n) dst[n] += c * src[n];
    }
  }
  return out;
}

SurfaceField dealias(const SurfaceField& f) {
  auto s = to_spectral(f);
  const Grid& g = *f.grid();
  apply_multiplier(s, 1, [&](int i, int j) { return g.below_dealias_cutoff(i, j) ? 1.0 : 0.0; });
  return to_physical(s);
}

SlabField dealias(const SlabField& f) {
  auto s = to_spectral(f);
  const Grid& g = *f.grid();
  apply_multiplier(s, g.nz(),
                   [&](int i, int j) { return g.below_dealias_cutoff(i, j) ? 1.0 : 0.0; });
  return to_physical(s);
}

SurfaceField multiply(const SurfaceField& f, const SurfaceField& g, bool dealias_result) {
  require_same_grid(f.grid(), g.grid(), "multiply");
  SurfaceField out(f.grid());
  auto a = f.values();
  auto b = g.values();
  auto o = out.values();
  for (std::size_t n = 0; n < o.size(); ++n) o[n] = a[n] * b[n];
  return dealias_result ? dealias(out) : out;
}

SlabField multiply(const SlabField& f, const SlabField& g, bool dealias_result) {
  require_same_grid(f.grid(), g.grid(), "multiply");
  SlabField out(f.grid());
  auto a = f.values();
  auto b = g.values();
  auto o = out.values();
  for (std::size_t n = 0; n < o.size(); ++n) o[n] = a[n] * b[n];
  return dealias_result ? dealias(out) : out;
}

double integrate(const SurfaceField& f) {
  const auto& g = f.grid()->spec();
  double s = 0.0;
  for (double v : f.values()) s += v;
  return s * g.L1 * g.L2 / static_cast<double>(f.values().size());
}

double integrate(const SlabField& f) {
  const auto& g = f.grid();
  const auto w = g->cc_weights();
  double total = 0.0;
  for (int k = 0; k < g->nz(); ++k) {
    double s = 0.0;
    for (double v : f.layer(k)) s += v;
    total += w[k] * s;
  }
  return total * g->spec().L1 * g->spec().L2 / static_cast<double>(g->layer_size());
}

double sobolev_norm_surface(const SurfaceField& f, double s) {
  const auto sp = to_spectral(f);
  const Grid& g = *f.grid();
  double sum = 0.0;
  for (int i = 0; i < g.n1(); ++i)
    for (int j = 0; j < g.m2(); ++j) {
      const double k = 2.0 * kPi * g.freq_abs(i, j);
      sum += g.hermitian_weight(j) * std::pow(1.0 + k * k, s) * std::norm(sp.at(i, j));
    }
  return std::sqrt(sum * g.spec().L1 * g.spec().L2);
}

double homogeneous_norm_surface(const SurfaceField& f, double s) {
  const auto sp = to_spectral(f);
  const Grid& g = *f.grid();
  double sum = 0.0;
  for (int i = 0; i < g.n1(); ++i)
    for (int j = 0; j < g.m2(); ++j) {
      if (i == 0 && j == 0) continue;
      const double k = 2.0 * kPi * g.freq_abs(i, j);
      sum += g.hermitian_weight(j) * std::pow(k, 2.0 * s) * std::norm(sp.at(i, j));
    }
  return std::sqrt(sum * g.spec().L1 * g.spec().L2);
}

double sobolev_norm_slab(const SlabField& f, int k) {
  if (k < 0 || k > 4) throw ConfigError("sobolev_norm_slab: order must lie in [0, 4]");
  const auto& g = f.grid();
  const int nz = g->nz();
  const auto w = g->cc_weights();
  const std::size_t ms = g->spectral_layer_size();

  // Spectra of d3^a f, a = 0..k.
  std::vector<SlabSpectrum> dz_spec;
  SlabField cur = f;
  for (int a = 0; a <= k; ++a) {
    dz_spec.push_back(to_spectral(cur));
    if (a < k) cur = vertical_derivative(cur);
  }

  double total = 0.0;
  for (int i = 0; i < g->n1(); ++i)
    for (int j = 0; j < g->m2(); ++j) {
      const double k1 = 2.0 * kPi * g->freq1(i);
      const double k2 = 2.0 * kPi * g->freq2(j);
      for (int a3 = 0; a3 <= k; ++a3) {
        double col = 0.0;
        for (int l = 0; l < nz; ++l) col += w[l] * std::norm(dz_spec[a3].c[l * ms + i * g->m2() + j]);
        double horiz = 0.0;
        for (int a1 = 0; a1 + a3 <= k; ++a1)
          for (int a2 = 0; a1 + a2 + a3 <= k; ++a2)
            horiz += std::pow(k1 * k1, a1) * std::pow(k2 * k2, a2);
        total += g->hermitian_weight(j) * horiz * col;
      }
    }
  return std::sqrt(total * g->spec().L1 * g->spec().L2);
}

double sobolev_norm_slab(const SlabVector& f, int k) {
  double s = 0.0;
  for (const auto& c : f) {
    const double n = sobolev_norm_slab(c, k);
    s += n * n;
  }
  return std::sqrt(s);
}

}  // namespace slabflow
