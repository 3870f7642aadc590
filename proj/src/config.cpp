#include "slabflow/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include "slabflow/error.hpp"

namespace slabflow {

namespace {

constexpr double kPi = std::numbers::pi;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  if (ec != std::errc() || p != end) return false;
  if constexpr (std::is_floating_point_v<T>) return std::isfinite(out);
  return true;
}

// Each key handler returns an empty string on success, else the message.
using Handler = std::function<std::string(RunConfig&, const std::string&)>;

Handler real_key(std::function<double&(RunConfig&)> field, std::function<std::string(double)> check) {
  return [=](RunConfig& c, const std::string& v) -> std::string {
    double x;
    if (!parse_number(v, x)) return "expected a real number, got '" + v + "'";
    if (auto err = check(x); !err.empty()) return err;
    field(c) = x;
    return {};
  };
}

Handler int_key(std::function<int&(RunConfig&)> field, std::function<std::string(int)> check) {
  return [=](RunConfig& c, const std::string& v) -> std::string {
    int x;
    if (!parse_number(v, x)) return "expected an integer, got '" + v + "'";
    if (auto err = check(x); !err.empty()) return err;
    field(c) = x;
    return {};
  };
}

template <class E>
Handler enum_key(std::function<E&(RunConfig&)> field, std::map<std::string, E> names) {
  return [=](RunConfig& c, const std::string& v) -> std::string {
    const auto it = names.find(v);
    if (it == names.end()) {
      std::string opts;
      for (const auto& [k, e] : names) opts += (opts.empty() ? "" : " | ") + k;
      return "expected one of " + opts + ", got '" + v + "'";
    }
    field(c) = it->second;
    return {};
  };
}

std::function<std::string(double)> positive(const std::string& name) {
  return [name](double x) { return x > 0 ? std::string() : name + " must be positive"; };
}

std::function<std::string(double)> unit_interval(const std::string& name) {
  return [name](double x) { return x > 0 && x <= 1 ? std::string() : name + " must lie in (0, 1]"; };
}

std::function<std::string(int)> horizontal_count(const std::string& name) {
  return [name](int n) {
    if (n < 4) return name + " must be at least 4";
    if (n % 2) return name + " must be even";
    return std::string();
  };
}

std::function<std::string(int)> at_least(const std::string& name, int lo) {
  return [name, lo](int n) { return n >= lo ? std::string() : name + " must be at least " + std::to_string(lo); };
}

std::string parse_grid_triple(const std::string& s, GridSpec& g) {
  const auto parts = split(s, 'x');
  if (parts.size() != 3 || !parse_number(parts[0], g.N1) || !parse_number(parts[1], g.N2) ||
      !parse_number(parts[2], g.Nz))
    return "expected N1xN2xNz, got '" + s + "'";
  try {
    g.validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> table = [] {
    std::map<std::string, Handler> h;
    h["grid.N1"] = int_key([](RunConfig& c) -> int& { return c.grid.N1; }, horizontal_count("N1"));
    h["grid.N2"] = int_key([](RunConfig& c) -> int& { return c.grid.N2; }, horizontal_count("N2"));
    h["grid.Nz"] = int_key([](RunConfig& c) -> int& { return c.grid.Nz; }, at_least("Nz", 5));
    h["grid.L1"] = real_key([](RunConfig& c) -> double& { return c.grid.L1; }, positive("L1"));
    h["grid.L2"] = real_key([](RunConfig& c) -> double& { return c.grid.L2; }, positive("L2"));
    h["grid.dealias"] = enum_key<bool>([](RunConfig& c) -> bool& { return c.grid.dealias; },
                                       {{"true", true}, {"false", false}});

    h["physics.b0"] = real_key([](RunConfig& c) -> double& { return c.grid.b0; }, positive("b0"));
    h["physics.bottom"] = enum_key<BottomKind>([](RunConfig& c) -> BottomKind& { return c.physics.bottom; },
                                               {{"flat", BottomKind::flat}, {"single_mode", BottomKind::single_mode}});
    h["physics.bottom_amplitude"] = real_key([](RunConfig& c) -> double& { return c.physics.bottom_amplitude; },
                                             [](double a) { return std::abs(a) < 1 ? std::string() : "|bottom_amplitude| must be below 1"; });
    h["physics.bottom_wavenumber"] = int_key([](RunConfig& c) -> int& { return c.physics.bottom_wavenumber; },
                                             at_least("bottom_wavenumber", 1));

    h["initial.eta"] = [](RunConfig& c, const std::string& v) -> std::string {
      std::vector<EtaMode> modes;
      for (const auto& item : split(v, ',')) {
        if (item.empty()) continue;
        std::istringstream in(item);
        std::string a, b, amp, extra;
        in >> a >> b >> amp;
        EtaMode m;
        if (in >> extra || !parse_number(a, m.m1) || !parse_number(b, m.m2) || !parse_number(amp, m.amplitude))
          return "expected 'm1 m2 amplitude' entries, got '" + item + "'";
        modes.push_back(m);
      }
      c.initial.eta = std::move(modes);
      return {};
    };
    h["initial.u0"] = enum_key<VelocityFamily>([](RunConfig& c) -> VelocityFamily& { return c.initial.u0; },
                                               {{"zero", VelocityFamily::zero},
                                                {"shear", VelocityFamily::shear},
                                                {"manufactured", VelocityFamily::manufactured}});
    h["initial.u0_amplitude"] = real_key([](RunConfig& c) -> double& { return c.initial.u0_amplitude; },
                                         [](double) { return std::string(); });

    h["time.T"] = real_key([](RunConfig& c) -> double& { return c.time.T; }, positive("T"));
    h["time.dt"] = real_key([](RunConfig& c) -> double& { return c.time.dt; }, positive("dt"));

    h["picard.tol_N"] = real_key([](RunConfig& c) -> double& { return c.picard.tol_N; }, positive("tol_N"));
    h["picard.max_picard"] = int_key([](RunConfig& c) -> int& { return c.picard.max_picard; }, at_least("max_picard", 1));
    h["picard.mode"] = enum_key<PicardMode>([](RunConfig& c) -> PicardMode& { return c.picard.mode; },
                                            {{"window", PicardMode::window}, {"step", PicardMode::step}});
    h["picard.delta"] = [](RunConfig& c, const std::string& v) -> std::string {
      double x;
      if (!parse_number(v, x)) return "expected a real number, got '" + v + "'";
      if (auto e = unit_interval("delta")(x); !e.empty()) return e;
      c.picard.delta = x;
      return {};
    };
    h["picard.closeness_cap"] = real_key([](RunConfig& c) -> double& { return c.picard.closeness_cap; },
                                         positive("closeness_cap"));

    h["extension.C_poisson"] = real_key([](RunConfig& c) -> double& { return c.extension.C_poisson; },
                                        positive("C_poisson"));
    h["extension.epsilon"] = [](RunConfig& c, const std::string& v) -> std::string {
      double x;
      if (!parse_number(v, x)) return "expected a real number, got '" + v + "'";
      if (auto e = unit_interval("epsilon")(x); !e.empty()) return e;
      c.extension.epsilon = x;
      return {};
    };

    h["output.dir"] = [](RunConfig& c, const std::string& v) -> std::string {
      if (v.empty()) return "dir must not be empty";
      c.output.dir = v;
      return {};
    };
    h["output.cadence"] = int_key([](RunConfig& c) -> int& { return c.output.cadence; }, at_least("cadence", 0));
    h["output.seed"] = [](RunConfig& c, const std::string& v) -> std::string {
      std::uint64_t x;
      if (!parse_number(v, x)) return "expected a non-negative integer, got '" + v + "'";
      c.output.seed = x;
      return {};
    };

    h["verify.samples"] = int_key([](RunConfig& c) -> int& { return c.verify.samples; }, at_least("samples", 1));
    h["verify.corrupt_geometry"] = real_key([](RunConfig& c) -> double& { return c.verify.corrupt_geometry; },
                                            [](double) { return std::string(); });

    h["bench.grids"] = [](RunConfig& c, const std::string& v) -> std::string {
      std::vector<GridSpec> grids;
      for (const auto& item : split(v, ',')) {
        GridSpec g;
        if (auto e = parse_grid_triple(item, g); !e.empty()) return e;
        grids.push_back(g);
      }
      if (grids.empty()) return "grids must list at least one N1xN2xNz entry";
      c.bench.grids = std::move(grids);
      return {};
    };
    h["bench.repeats"] = int_key([](RunConfig& c) -> int& { return c.bench.repeats; }, at_least("repeats", 1));
    return h;
  }();
  return table;
}

void cross_check(const RunConfig& c, const std::map<std::string, int>& lines, std::vector<std::string>& errors) {
  auto line_of = [&](const std::string& key) {
    const auto it = lines.find(key);
    return it == lines.end() ? std::string("defaults") : "line " + std::to_string(it->second);
  };
  try {
    TimeGrid::over(c.time.T, c.time.dt);
  } catch (const ConfigError& e) {
    errors.push_back(line_of(lines.count("time.dt") ? "time.dt" : "time.T") + ": time: " + e.what());
  }
  for (const auto& m : c.initial.eta)
    if (std::abs(m.m1) >= c.grid.N1 / 2 || std::abs(m.m2) >= c.grid.N2 / 2) {
      errors.push_back(line_of("initial.eta") + ": initial.eta: mode (" + std::to_string(m.m1) + ", " +
                       std::to_string(m.m2) + ") is not resolved below the Nyquist frequency");
      break;
    }
  if (c.physics.bottom == BottomKind::single_mode && c.physics.bottom_wavenumber >= c.grid.N1 / 2)
    errors.push_back(line_of("physics.bottom_wavenumber") +
                     ": physics.bottom_wavenumber: must be below N1 / 2");
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  cfg.bench.grids = {GridSpec{1, 1, 1, 8, 8, 9, true}, GridSpec{1, 1, 1, 16, 16, 17, true},
                     GridSpec{1, 1, 1, 32, 32, 17, true}};
  std::vector<std::string> errors;
  std::map<std::string, int> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string body = trim(std::string_view(raw).substr(0, raw.find('#')));
    if (body.empty()) continue;
    const std::string where = "line " + std::to_string(line) + ": ";
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      errors.push_back(where + "expected 'key = value', got '" + body + "'");
      continue;
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto it = handlers().find(key);
    if (it == handlers().end()) {
      errors.push_back(where + "unknown key '" + key + "'");
      continue;
    }
    if (seen.count(key)) {
      errors.push_back(where + key + ": duplicate key (first set on line " + std::to_string(seen[key]) + ")");
      continue;
    }
    seen[key] = line;
    if (auto err = it->second(cfg, value); !err.empty()) errors.push_back(where + key + ": " + err);
  }
  if (errors.empty()) cross_check(cfg, seen, errors);
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

BottomProfile make_bottom(const RunConfig& cfg, const GridPtr& grid) {
  if (cfg.physics.bottom == BottomKind::single_mode)
    return BottomProfile::single_mode(grid, cfg.physics.bottom_amplitude, cfg.physics.bottom_wavenumber);
  return BottomProfile::flat(grid);
}

SurfaceField make_eta0(const RunConfig& cfg, const GridPtr& grid) {
  const double L1 = grid->spec().L1, L2 = grid->spec().L2;
  const auto modes = cfg.initial.eta;
  return SurfaceField::from_function(grid, [=](double x1, double x2) {
    double s = 0.0;
    for (const auto& m : modes) s += m.amplitude * std::cos(2 * kPi * (m.m1 * x1 / L1 + m.m2 * x2 / L2));
    return s;
  });
}

SlabVector make_u0(const RunConfig& cfg, const GridPtr& grid) {
  SlabVector u = zero_vector(grid);
  const double a = cfg.initial.u0_amplitude;
  const double b0 = grid->spec().b0, L1 = grid->spec().L1;
  switch (cfg.initial.u0) {
    case VelocityFamily::zero:
      break;
    case VelocityFamily::shear:
      // Stress-free at the top, clamped at the bottom.
      u[0] = SlabField::from_profile(grid, [=](double z) { return a * std::cos(kPi * z / (2 * b0)); });
      break;
    case VelocityFamily::manufactured: {
      // u = (-d3 psi, 0, d1 psi), psi = a sin(2 pi x1 / L1) g(x3 / b0) with
      // g = (s + 1)^2 (1 + c s): no-slip at the bottom, tangential stress free at the top.
      const double k = 2 * kPi / L1;
      const double c = -(2 + k * k * b0 * b0) / 4;
      auto g = [c](double s) { return (s + 1) * (s + 1) * (1 + c * s); };
      auto dg = [c](double s) { return 2 * (s + 1) * (1 + c * s) + c * (s + 1) * (s + 1); };
      u[0] = SlabField::from_function(grid, [=](double x1, double, double z) { return -a * std::sin(k * x1) * dg(z / b0) / b0; });
      u[2] = SlabField::from_function(grid, [=](double x1, double, double z) { return a * k * std::cos(k * x1) * g(z / b0); });
      break;
    }
  }
  return u;
}

ExtensionParams make_extension(const RunConfig& cfg, const SurfaceField& eta0, const BottomProfile& bottom) {
  ExtensionParams p = choose_epsilon(eta0, bottom, cfg.extension.C_poisson);
  if (cfg.extension.epsilon) p.epsilon = *cfg.extension.epsilon;
  if (cfg.picard.delta) p.delta = *cfg.picard.delta;
  return p;
}

PicardConfig make_picard_config(const RunConfig& cfg, const ExtensionParams& params) {
  PicardConfig p;
  p.T = cfg.time.T;
  p.dt = cfg.time.dt;
  p.tol_N = cfg.picard.tol_N;
  p.max_picard = cfg.picard.max_picard;
  p.mode = cfg.picard.mode;
  p.delta_floor = 0.5 * params.delta;
  p.closeness_cap = cfg.picard.closeness_cap;
  return p;
}

std::string to_string(PicardMode mode) { return mode == PicardMode::window ? "window" : "step"; }

std::string to_string(VelocityFamily f) {
  switch (f) {
    case VelocityFamily::zero: return "zero";
    case VelocityFamily::shear: return "shear";
    case VelocityFamily::manufactured: return "manufactured";
  }
  return "zero";
}

std::string to_string(BottomKind b) { return b == BottomKind::flat ? "flat" : "single_mode"; }

}  // namespace slabflow
