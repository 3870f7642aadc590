#pragma once

#include <cstdint>

#include "slabflow/grid.hpp"

namespace slabflow {

/// Seeded uniform generator on [-1, 1); bit-stable across platforms.
class TrialRng {
 public:
  explicit TrialRng(std::uint64_t seed) : state_(seed * 0x9E3779B97F4A7C15ull + 1) {}
  double uniform();

 private:
  std::uint64_t state_;
};

/// Real band-limited surface field with |m_j| <= max_mode and amplitudes ~ (1+|m|^2)^{-2}.
/// The zero mode is included only when with_mean is set.
SurfaceField random_surface(const GridPtr& grid, TrialRng& rng, int max_mode,
                            bool with_mean = false);

/// Band-limited slab field: horizontal modes as above times random cubic profiles in x3.
SlabField random_slab(const GridPtr& grid, TrialRng& rng, int max_mode);

/// Random slab vector field vanishing at x3 = -b0 (factor (x3 + b0)).
SlabVector random_clamped_vector(const GridPtr& grid, TrialRng& rng, int max_mode);

}  // namespace slabflow
