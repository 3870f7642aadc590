#include "slabflow/random_fields.hpp"

#include <cmath>
#include <numbers>

namespace slabflow {

double TrialRng::uniform() {
  // splitmix64
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  return 2.0 * (static_cast<double>(z >> 11) * 0x1.0p-53) - 1.0;
}

namespace {

struct Mode {
  int m1, m2;
  double a, b;
};

std::vector<Mode> draw_modes(TrialRng& rng, int max_mode, bool with_mean) {
  std::vector<Mode> modes;
  for (int m1 = -max_mode; m1 <= max_mode; ++m1)
    for (int m2 = 0; m2 <= max_mode; ++m2) {
      if (m2 == 0 && m1 < 0) continue;
      if (m1 == 0 && m2 == 0 && !with_mean) continue;
      const double amp = 1.0 / std::pow(1.0 + m1 * m1 + m2 * m2, 2.0);
      const double a = amp * rng.uniform();
      const double b = (m1 == 0 && m2 == 0) ? 0.0 : amp * rng.uniform();
      modes.push_back({m1, m2, a, b});
    }
  return modes;
}

double eval_modes(const std::vector<Mode>& modes, const GridSpec& s, double x1, double x2) {
  double v = 0.0;
  for (const auto& m : modes) {
    const double ph = 2.0 * std::numbers::pi * (m.m1 * x1 / s.L1 + m.m2 * x2 / s.L2);
    v += m.a * std::cos(ph) + m.b * std::sin(ph);
  }
  return v;
}

}  // namespace

SurfaceField random_surface(const GridPtr& grid, TrialRng& rng, int max_mode, bool with_mean) {
  const auto modes = draw_modes(rng, max_mode, with_mean);
  const GridSpec spec = grid->spec();
  return SurfaceField::from_function(
      grid, [&](double x1, double x2) { return eval_modes(modes, spec, x1, x2); });
}

SlabField random_slab(const GridPtr& grid, TrialRng& rng, int max_mode) {
  const GridSpec spec = grid->spec();
  SlabField out(grid);
  for (int q = 0; q <= 3; ++q) {
    const auto modes = draw_modes(rng, max_mode, true);
    const SurfaceField h = SurfaceField::from_function(
        grid, [&](double x1, double x2) { return eval_modes(modes, spec, x1, x2); });
    for (int k = 0; k < grid->nz(); ++k) {
      const double s = std::pow(grid->x3(k) / spec.b0, q);
      auto layer = out.layer(k);
      auto src = h.values();
      for (std::size_t n = 0; n < layer.size(); ++n) layer[n] += s * src[n];
    }
  }
  return out;
}

SlabVector random_clamped_vector(const GridPtr& grid, TrialRng& rng, int max_mode) {
  SlabVector v;
  const SlabField clamp =
      SlabField::from_profile(grid, [b0 = grid->spec().b0](double z) { return (z + b0) / b0; });
  for (auto& c : v) c = multiply(random_slab(grid, rng, max_mode), clamp);
  return v;
}

}  // namespace slabflow
