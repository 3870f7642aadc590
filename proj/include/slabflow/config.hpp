#pragma once

// Run configuration: flat `section.key = value` text with `#` comments.
//
//   grid.N1 = 16            grid.N2 = 16          grid.Nz = 17
//   grid.L1 = 1             grid.L2 = 1           grid.dealias = true
//   physics.b0 = 1          physics.bottom = flat | single_mode
//   physics.bottom_amplitude = 0                  physics.bottom_wavenumber = 1
//   initial.eta = 1 0 0.02, 0 1 0.01   (m1 m2 amplitude of a cos(2 pi (m1 x1/L1 + m2 x2/L2)))
//   initial.u0 = zero | shear | manufactured      initial.u0_amplitude = 0.1
//   time.T = 0.05           time.dt = 0.005
//   picard.tol_N = 1e-18    picard.max_picard = 30    picard.mode = window | step
//   picard.delta = <derived>                      picard.closeness_cap = 1
//   extension.C_poisson = 1 extension.epsilon = <derived>
//   output.dir = slabflow_out  output.cadence = 0  output.seed = 1
//   verify.samples = 20     verify.corrupt_geometry = 0
//   bench.grids = 8x8x9, 16x16x17, 32x32x17       bench.repeats = 3

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slabflow/evolution.hpp"
#include "slabflow/iteration.hpp"

namespace slabflow {

enum class BottomKind { flat, single_mode };
enum class VelocityFamily { zero, shear, manufactured };

struct EtaMode {
  int m1 = 0;
  int m2 = 0;
  double amplitude = 0.0;
};

struct RunConfig {
  GridSpec grid;

  struct Physics {
    BottomKind bottom = BottomKind::flat;
    double bottom_amplitude = 0.0;
    int bottom_wavenumber = 1;
  } physics;

  struct Initial {
    std::vector<EtaMode> eta;
    VelocityFamily u0 = VelocityFamily::zero;
    double u0_amplitude = 0.1;
  } initial;

  struct Time {
    double T = 0.05;
    double dt = 0.005;
  } time;

  struct Picard {
    double tol_N = 1e-18;
    int max_picard = 30;
    PicardMode mode = PicardMode::window;
    std::optional<double> delta;
    double closeness_cap = 1.0;
  } picard;

  struct Extension {
    double C_poisson = 1.0;
    std::optional<double> epsilon;
  } extension;

  struct Output {
    std::string dir = "slabflow_out";
    int cadence = 0;  // dump every cadence-th time node; 0 dumps only the final state
    std::uint64_t seed = 1;
  } output;

  struct Verify {
    int samples = 20;
    double corrupt_geometry = 0.0;
  } verify;

  struct Bench {
    std::vector<GridSpec> grids;
    int repeats = 3;
  } bench;
};

/// Throws ConfigError listing every problem, one "line N: ..." entry per line.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

BottomProfile make_bottom(const RunConfig& cfg, const GridPtr& grid);
SurfaceField make_eta0(const RunConfig& cfg, const GridPtr& grid);
SlabVector make_u0(const RunConfig& cfg, const GridPtr& grid);
/// eps from the config override or the delta/C_poisson rule; delta override applied.
ExtensionParams make_extension(const RunConfig& cfg, const SurfaceField& eta0, const BottomProfile& bottom);
PicardConfig make_picard_config(const RunConfig& cfg, const ExtensionParams& params);

std::string to_string(PicardMode mode);
std::string to_string(VelocityFamily f);
std::string to_string(BottomKind b);

}  // namespace slabflow
