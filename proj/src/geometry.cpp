#include "slabflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "slabflow/error.hpp"

namespace slabflow {

namespace {

constexpr double kPi = std::numbers::pi;

// out[k](x') = f(x') * profile(x3_k), or f(x') broadcast when profile is empty.
SlabField broadcast(const SurfaceField& f, const std::function<double(double)>& profile = {}) {
  const auto& g = f.grid();
  SlabField out(g);
  for (int k = 0; k < g->nz(); ++k) {
    const double s = profile ? profile(g->x3(k)) : 1.0;
    auto dst = out.layer(k);
    auto src = f.values();
    for (std::size_t n = 0; n < dst.size(); ++n) dst[n] = s * src[n];
  }
  return out;
}

SlabField lift(const SurfaceField& f, double epsilon, bool vertical_derivative) {
  const auto& g = f.grid();
  const auto fs = to_spectral(f);
  SlabSpectrum s{g, std::vector<cplx>(g->spectral_layer_size() * g->nz())};
  for (int k = 0; k < g->nz(); ++k) {
    const double z = g->x3(k);
    for (int i = 0; i < g->n1(); ++i)
      for (int j = 0; j < g->m2(); ++j) {
        const double n = g->freq_abs(i, j);
        double factor = std::exp(epsilon * n * z);
        if (vertical_derivative) factor *= epsilon * n;
        s.at(k, i, j) = factor * fs.at(i, j);
      }
  }
  return to_physical(s);
}

template <class F>
SlabField pointwise(const GridPtr& g, F&& f) {
  SlabField out(g);
  auto o = out.values();
  for (std::size_t n = 0; n < o.size(); ++n) o[n] = f(n);
  return out;
}

struct Derivatives {
  SlabField d1, d2, d3;
};

Derivatives derivatives(const SlabField& f) {
  auto h = horizontal_gradient(f);
  return {std::move(h[0]), std::move(h[1]), vertical_derivative(f)};
}

}  // namespace

// --------------------------------------------------------------------- bottom

BottomProfile BottomProfile::flat(const GridPtr& grid) {
  return {SurfaceField(grid, grid->spec().b0), grid->spec().b0};
}

BottomProfile BottomProfile::single_mode(const GridPtr& grid, double amplitude, int wavenumber) {
  const double b0 = grid->spec().b0;
  const double l1 = grid->spec().L1;
  auto b = SurfaceField::from_function(grid, [=](double x1, double) {
    return b0 * (1.0 + amplitude * std::cos(2.0 * kPi * wavenumber * x1 / l1));
  });
  if (b.min() <= 0.0) throw ConfigError("bottom profile must stay positive");
  return {std::move(b), b0};
}

// ------------------------------------------------------------------ extension

SlabField poisson_extend(const SurfaceField& f, double epsilon) {
  if (!(epsilon > 0.0) || epsilon > 1.0) throw ConfigError("poisson_extend: epsilon must lie in (0, 1]");
  return lift(f, epsilon, false);
}

SlabField poisson_extend_dz(const SurfaceField& f, double epsilon) {
  if (!(epsilon > 0.0) || epsilon > 1.0) throw ConfigError("poisson_extend: epsilon must lie in (0, 1]");
  return lift(f, epsilon, true);
}

ExtensionParams choose_epsilon(const SurfaceField& eta0, const BottomProfile& bottom,
                               double c_poisson) {
  if (!(c_poisson > 0.0)) throw ConfigError("C_poisson must be positive");
  const double gap = (eta0 + bottom.b).min();
  if (gap <= 0.0) {
    std::ostringstream msg;
    msg << "surface touches bottom: min(eta0 + b) = " << gap;
    throw SolverError(msg.str());
  }
  ExtensionParams p;
  p.c_poisson = c_poisson;
  p.delta = gap / (2.0 * bottom.b0);
  const double n52 = sobolev_norm_surface(eta0, 2.5);
  const double denom = 4.0 * c_poisson * c_poisson * std::max(n52 * n52, 1e-12);
  p.epsilon = std::min(1.0, p.delta * p.delta / denom);

  const double j0 = min_jacobian(eta0, bottom, p.epsilon);
  if (!(j0 > p.delta)) {
    std::ostringstream msg;
    msg << "epsilon rule failed; decrease C or refine grid (min J0 = " << j0
        << ", delta = " << p.delta << ")";
    throw SolverError(msg.str());
  }
  return p;
}

double min_jacobian(const SurfaceField& eta, const BottomProfile& bottom, double epsilon) {
  const auto& g = eta.grid();
  const double b0 = bottom.b0;
  const SlabField eb = poisson_extend(eta, epsilon);
  const SlabField ebz = poisson_extend_dz(eta, epsilon);
  double m = std::numeric_limits<double>::infinity();
  for (int k = 0; k < g->nz(); ++k) {
    const double bt = 1.0 + g->x3(k) / b0;
    auto e = eb.layer(k);
    auto ez = ebz.layer(k);
    auto b = bottom.b.values();
    for (std::size_t n = 0; n < e.size(); ++n)
      m = std::min(m, b[n] / b0 + e[n] / b0 + ez[n] * bt);
  }
  return m;
}

// ------------------------------------------------------------------- geometry

GeometryPack build_geometry(const SurfaceField& eta, const std::optional<SurfaceField>& deta_dt,
                            const BottomProfile& bottom, const ExtensionParams& params) {
  const auto& g = eta.grid();
  require_same_grid(g, bottom.b.grid(), "build_geometry");
  const double b0 = bottom.b0;
  GeometryPack p;
  p.eta = eta;
  p.bottom = bottom;
  p.params = params;
  p.etabar = poisson_extend(eta, params.epsilon);
  p.etabar_dz = poisson_extend_dz(eta, params.epsilon);
  p.btilde = SlabField::from_profile(g, [b0](double z) { return 1.0 + z / b0; });

  const auto db = horizontal_gradient(bottom.b);
  const auto deb = horizontal_gradient(p.etabar);
  const SlabField x3db1 = broadcast(db[0], [b0](double z) { return z / b0; });
  const SlabField x3db2 = broadcast(db[1], [b0](double z) { return z / b0; });
  const SlabField bb = broadcast(bottom.b);

  auto bt = p.btilde.values();
  p.A = pointwise(g, [&](std::size_t n) { return x3db1.values()[n] + deb[0].values()[n] * bt[n]; });
  p.B = pointwise(g, [&](std::size_t n) { return x3db2.values()[n] + deb[1].values()[n] * bt[n]; });
  p.J = pointwise(g, [&](std::size_t n) {
    return bb.values()[n] / b0 + p.etabar.values()[n] / b0 + p.etabar_dz.values()[n] * bt[n];
  });

  double jmin = std::numeric_limits<double>::infinity();
  std::size_t where = 0;
  auto jv = p.J.values();
  for (std::size_t n = 0; n < jv.size(); ++n)
    if (jv[n] < jmin) {
      jmin = jv[n];
      where = n;
    }
  if (!(jmin > 0.0)) {
    const std::size_t ls = g->layer_size();
    const int k = static_cast<int>(where / ls);
    const int i = static_cast<int>((where % ls) / g->n2());
    const int j = static_cast<int>(where % g->n2());
    std::ostringstream msg;
    msg << "degenerate flattening map: min J = " << jmin << " at (x1, x2, x3) = (" << g->x1(i)
        << ", " << g->x2(j) << ", " << g->x3(k) << ")";
    throw SolverError(msg.str());
  }

  p.K = pointwise(g, [&](std::size_t n) { return 1.0 / jv[n]; });
  p.AK = multiply(p.A, p.K);
  p.BK = multiply(p.B, p.K);
  p.Ntop = surface_normal(eta);

  if (deta_dt) {
    require_same_grid(g, deta_dt->grid(), "build_geometry");
    GeometryTimeDerivative d;
    d.deta_dt = *deta_dt;
    d.etabar_t = poisson_extend(*deta_dt, params.epsilon);
    const SlabField ebt_z = poisson_extend_dz(*deta_dt, params.epsilon);
    const auto debt = horizontal_gradient(d.etabar_t);
    d.A_t = multiply(debt[0], p.btilde);
    d.B_t = multiply(debt[1], p.btilde);
    d.J_t = pointwise(g, [&](std::size_t n) {
      return d.etabar_t.values()[n] / b0 + ebt_z.values()[n] * bt[n];
    });
    d.K_t = pointwise(g, [&](std::size_t n) {
      const double k = p.K.values()[n];
      return -k * k * d.J_t.values()[n];
    });
    const auto dn = horizontal_gradient(*deta_dt);
    d.Ntop_t = {-1.0 * dn[0], -1.0 * dn[1], SurfaceField(g)};
    p.dt = std::move(d);
  }
  return p;
}

double GeometryPack::min_J() const { return J.min(); }

Mat3 GeometryPack::amat(int k, int i, int j) const {
  return {{{1.0, 0.0, -AK(k, i, j)}, {0.0, 1.0, -BK(k, i, j)}, {0.0, 0.0, K(k, i, j)}}};
}

Mat3 GeometryPack::mmat(int k, int i, int j) const {
  const double kk = K(k, i, j);
  return {{{kk, 0.0, 0.0}, {0.0, kk, 0.0}, {AK(k, i, j), BK(k, i, j), 1.0}}};
}

Mat3 GeometryPack::mmat_inverse(int k, int i, int j) const {
  const double jj = J(k, i, j);
  return {{{jj, 0.0, 0.0}, {0.0, jj, 0.0}, {-A(k, i, j), -B(k, i, j), 1.0}}};
}

Mat3 GeometryPack::rmat(int k, int i, int j) const {
  if (!dt) throw ConfigError("R requires a geometry built with d_t eta");
  const double jj = J(k, i, j);
  const double kk = K(k, i, j);
  const double kt = dt->K_t(k, i, j);
  const double akt = dt->A_t(k, i, j) * kk + A(k, i, j) * kt;
  const double bkt = dt->B_t(k, i, j) * kk + B(k, i, j) * kt;
  return {{{kt * jj, 0.0, 0.0}, {0.0, kt * jj, 0.0}, {akt * jj, bkt * jj, 0.0}}};
}

// ------------------------------------------------------------------ operators

SlabVector grad_A(const GeometryPack& g, const SlabField& f) {
  const auto d = derivatives(f);
  const auto& grid = f.grid();
  auto ak = g.AK.values();
  auto bk = g.BK.values();
  auto k = g.K.values();
  return {pointwise(grid, [&](std::size_t n) { return d.d1.values()[n] - ak[n] * d.d3.values()[n]; }),
          pointwise(grid, [&](std::size_t n) { return d.d2.values()[n] - bk[n] * d.d3.values()[n]; }),
          pointwise(grid, [&](std::size_t n) { return k[n] * d.d3.values()[n]; })};
}

SlabField div_A(const GeometryPack& g, const SlabVector& v) {
  const SlabField d1 = horizontal_derivative(v[0], 1);
  const SlabField d2 = horizontal_derivative(v[1], 2);
  const SlabField z1 = vertical_derivative(v[0]);
  const SlabField z2 = vertical_derivative(v[1]);
  const SlabField z3 = vertical_derivative(v[2]);
  auto ak = g.AK.values();
  auto bk = g.BK.values();
  auto k = g.K.values();
  return pointwise(v[0].grid(), [&](std::size_t n) {
    return d1.values()[n] - ak[n] * z1.values()[n] + d2.values()[n] - bk[n] * z2.values()[n] +
           k[n] * z3.values()[n];
  });
}

SlabField lap_A(const GeometryPack& g, const SlabField& f) { return div_A(g, grad_A(g, f)); }

SlabVector lap_A(const GeometryPack& g, const SlabVector& u) {
  return {lap_A(g, u[0]), lap_A(g, u[1]), lap_A(g, u[2])};
}

SlabTensor sym_grad_A(const GeometryPack& g, const SlabVector& u) {
  // G[i][j] = (grad_A u_j)_i
  std::array<SlabVector, 3> grads = {grad_A(g, u[0]), grad_A(g, u[1]), grad_A(g, u[2])};
  SlabTensor d;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) d[i][j] = grads[j][i] + grads[i][j];
  return d;
}

SlabTensor stress_A(const GeometryPack& g, const SlabField& p, const SlabVector& u) {
  SlabTensor s = sym_grad_A(g, u);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      s[i][j] *= -1.0;
      if (i == j) s[i][j] += p;
    }
  return s;
}

SlabVector div_A(const GeometryPack& g, const SlabTensor& s) {
  return {div_A(g, s[0]), div_A(g, s[1]), div_A(g, s[2])};
}

SurfaceVector surface_traction(const SlabTensor& s, const SurfaceVector& normal) {
  const auto& g = normal[0].grid();
  SurfaceVector out = zero_surface_vector(g);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out[i] += multiply(s[i][j].top(), normal[j]);
  return out;
}

namespace {

template <class MatFn>
SlabVector apply_pointwise(const GeometryPack& g, const SlabVector& v, MatFn&& mat) {
  const auto& grid = v[0].grid();
  SlabVector out = zero_vector(grid);
  for (int k = 0; k < grid->nz(); ++k)
    for (int i = 0; i < grid->n1(); ++i)
      for (int j = 0; j < grid->n2(); ++j) {
        const Mat3 m = mat(g, k, i, j);
        for (int r = 0; r < 3; ++r) {
          double s = 0.0;
          for (int c = 0; c < 3; ++c) s += m[r][c] * v[c](k, i, j);
          out[r](k, i, j) = s;
        }
      }
  return out;
}

}  // namespace

SlabVector apply_M(const GeometryPack& g, const SlabVector& w) {
  return apply_pointwise(g, w, [](const GeometryPack& p, int k, int i, int j) { return p.mmat(k, i, j); });
}

SlabVector apply_M_inverse(const GeometryPack& g, const SlabVector& v) {
  return apply_pointwise(g, v, [](const GeometryPack& p, int k, int i, int j) { return p.mmat_inverse(k, i, j); });
}

SlabVector apply_R(const GeometryPack& g, const SlabVector& v) {
  if (!g.has_time_derivative()) throw ConfigError("R requires a geometry built with d_t eta");
  return apply_pointwise(g, v, [](const GeometryPack& p, int k, int i, int j) { return p.rmat(k, i, j); });
}

SurfaceVector surface_normal(const SurfaceField& eta) {
  const auto d = horizontal_gradient(eta);
  return {-1.0 * d[0], -1.0 * d[1], SurfaceField(eta.grid(), 1.0)};
}

SurfaceVector project_tangent(const SurfaceVector& v, const SurfaceField& eta0) {
  const SurfaceVector n = surface_normal(eta0);
  const auto& g = eta0.grid();
  SurfaceVector out = v;
  for (int i = 0; i < g->n1(); ++i)
    for (int j = 0; j < g->n2(); ++j) {
      double vn = 0.0;
      double nn = 0.0;
      for (int c = 0; c < 3; ++c) {
        vn += v[c](i, j) * n[c](i, j);
        nn += n[c](i, j) * n[c](i, j);
      }
      for (int c = 0; c < 3; ++c) out[c](i, j) = v[c](i, j) - vn * n[c](i, j) / nn;
    }
  return out;
}

SurfaceVector bottom_normal(const BottomProfile& bottom) {
  const auto db = horizontal_gradient(bottom.b);
  const auto& g = bottom.b.grid();
  SurfaceVector out = zero_surface_vector(g);
  for (int i = 0; i < g->n1(); ++i)
    for (int j = 0; j < g->n2(); ++j) {
      const double a = db[0](i, j);
      const double b = db[1](i, j);
      const double len = std::sqrt(a * a + b * b + 1.0);
      out[0](i, j) = -a / len;
      out[1](i, j) = -b / len;
      out[2](i, j) = -1.0 / len;
    }
  return out;
}

IdentityReport verify_identities(const GeometryPack& p) {
  const auto& g = p.grid();
  IdentityReport r;

  // Row j of J A: (J, 0, -A) for j = 1, (0, J, -B) for j = 2, (0, 0, J K) for j = 3.
  const SlabField jak = multiply(p.J, p.AK);
  const SlabField jbk = multiply(p.J, p.BK);
  const SlabField jk = multiply(p.J, p.K);
  const SlabField row1 = horizontal_derivative(p.J, 1) - vertical_derivative(jak);
  const SlabField row2 = horizontal_derivative(p.J, 2) - vertical_derivative(jbk);
  const SlabField row3 = vertical_derivative(jk);
  r.piola = std::max({row1.max_abs(), row2.max_abs(), row3.max_abs()});

  const SurfaceVector top = {-1.0 * jak.top(), -1.0 * jbk.top(), jk.top()};
  r.jae3_top = std::max({(top[0] - p.Ntop[0]).max_abs(), (top[1] - p.Ntop[1]).max_abs(),
                         (top[2] - p.Ntop[2]).max_abs()});

  const auto db = horizontal_gradient(p.bottom.b);
  const SurfaceVector bot = {-1.0 * jak.bottom(), -1.0 * jbk.bottom(), jk.bottom()};
  r.jae3_bottom = std::max({(bot[0] - db[0]).max_abs(), (bot[1] - db[1]).max_abs(),
                            (bot[2] - SurfaceField(g, 1.0)).max_abs()});

  if (p.dt) {
    double worst = 0.0;
    for (int i = 0; i < g->n1(); ++i)
      for (int j = 0; j < g->n2(); ++j) {
        const Mat3 rm = p.rmat(0, i, j);
        for (int c = 0; c < 3; ++c) {
          double s = 0.0;
          for (int q = 0; q < 3; ++q) s += rm[q][c] * p.Ntop[q](i, j);
          worst = std::max(worst, std::abs(s + p.dt->Ntop_t[c](i, j)));
        }
      }
    r.r_identity = worst;
  }
  return r;
}

}  // namespace slabflow
