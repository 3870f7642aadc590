#include "slabflow/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "slabflow/error.hpp"

namespace slabflow {

namespace {

constexpr char kMagic[4] = {'S', 'L', 'F', '1'};

template <class T>
void put(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw ConfigError("truncated field dump " + path.string());
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

double interior_divergence(const GeometryPack& pack, const SlabVector& u) {
  const SlabField d = div_A(pack, u);
  double m = 0.0;
  for (int k = 1; k + 1 < pack.grid()->nz(); ++k)
    for (double v : d.layer(k)) m = std::max(m, std::abs(v));
  return m;
}

nlohmann::ordered_json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace

FieldDump make_dump(const std::vector<SlabField>& fields, double t) {
  if (fields.empty()) throw ConfigError("make_dump: no fields");
  const GridPtr& g = fields.front().grid();
  FieldDump d;
  d.n1 = g->n1();
  d.n2 = g->n2();
  d.nz = g->nz();
  d.components = static_cast<std::uint32_t>(fields.size());
  d.L1 = g->spec().L1;
  d.L2 = g->spec().L2;
  d.b0 = g->spec().b0;
  d.t = t;
  d.values.reserve(fields.size() * g->layer_size() * g->nz());
  for (const auto& f : fields) {
    require_same_grid(g, f.grid(), "make_dump");
    for (int i = 0; i < g->n1(); ++i)
      for (int j = 0; j < g->n2(); ++j)
        for (int k = 0; k < g->nz(); ++k) d.values.push_back(f(k, i, j));
  }
  return d;
}

FieldDump make_dump(const SurfaceField& field, double t) {
  const GridPtr& g = field.grid();
  FieldDump d;
  d.n1 = g->n1();
  d.n2 = g->n2();
  d.nz = 1;
  d.components = 1;
  d.L1 = g->spec().L1;
  d.L2 = g->spec().L2;
  d.b0 = g->spec().b0;
  d.t = t;
  d.values.assign(field.values().begin(), field.values().end());
  return d;
}

SlabField dump_component(const FieldDump& dump, const GridPtr& grid, int c) {
  if (static_cast<int>(dump.n1) != grid->n1() || static_cast<int>(dump.n2) != grid->n2() ||
      static_cast<int>(dump.nz) != grid->nz() || c < 0 || c >= static_cast<int>(dump.components))
    throw ConfigError("dump_component: dump does not match the grid");
  SlabField f(grid);
  std::size_t n = static_cast<std::size_t>(c) * grid->layer_size() * grid->nz();
  for (int i = 0; i < grid->n1(); ++i)
    for (int j = 0; j < grid->n2(); ++j)
      for (int k = 0; k < grid->nz(); ++k) f(k, i, j) = dump.values[n++];
  return f;
}

void write_dump(const std::filesystem::path& path, const FieldDump& d) {
  const std::size_t expected = static_cast<std::size_t>(d.n1) * d.n2 * d.nz * d.components;
  if (d.values.size() != expected) throw ConfigError("write_dump: value count does not match the header");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write field dump " + path.string());
  out.write(kMagic, 4);
  for (std::uint32_t v : {d.n1, d.n2, d.nz, d.components}) put(out, v);
  for (double v : {d.L1, d.L2, d.b0, d.t}) put(out, v);
  for (double v : d.values) put(out, v);
  if (!out) throw ConfigError("error writing field dump " + path.string());
}

FieldDump read_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open field dump " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw ConfigError("not an SLF1 field dump: " + path.string());
  FieldDump d;
  d.n1 = get<std::uint32_t>(in, path);
  d.n2 = get<std::uint32_t>(in, path);
  d.nz = get<std::uint32_t>(in, path);
  d.components = get<std::uint32_t>(in, path);
  d.L1 = get<double>(in, path);
  d.L2 = get<double>(in, path);
  d.b0 = get<double>(in, path);
  d.t = get<double>(in, path);
  const std::size_t count = static_cast<std::size_t>(d.n1) * d.n2 * d.nz * d.components;
  d.values.resize(count);
  for (auto& v : d.values) v = get<double>(in, path);
  if (in.peek() != std::char_traits<char>::eof()) throw ConfigError("trailing bytes in field dump " + path.string());
  return d;
}

std::vector<CsvRow> diagnostics_rows(const PicardResult& result, const InitialData& data) {
  const auto& states = result.traj.states;
  std::vector<CsvRow> rows;
  rows.reserve(states.size());
  for (std::size_t n = 0; n < states.size(); ++n) {
    const FlowState& s = states[n];
    const GeometryPack pack = build_geometry(s.eta, std::nullopt, data.bottom, data.params);
    CsvRow r;
    r.t = s.t;
    r.min_J = pack.min_J();
    double e = 0.0;
    for (int c = 0; c < 3; ++c) e += integrate(multiply(pack.J, multiply(s.u[c], s.u[c])));
    r.energy = 0.5 * e;
    r.div_residual = interior_divergence(pack, s.u);
    r.eta_amplitude = s.eta.max_abs();
    if (result.report.step_sweeps.empty())
      r.picard_sweeps = result.report.sweep_count;
    else
      r.picard_sweeps = n == 0 ? 0 : result.report.step_sweeps[n - 1];
    rows.push_back(r);
  }
  return rows;
}

void write_csv(std::ostream& out, const std::vector<CsvRow>& rows) {
  out << kCsvHeader << '\n';
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", r.t, r.min_J, r.energy, r.div_residual,
                  r.eta_amplitude, r.picard_sweeps);
    out << buf;
  }
}

std::string summary_json(const RunConfig& cfg, const std::string& status, const std::string& message,
                         const PicardReport* report, const DiagnosticsReport* diag) {
  using json = nlohmann::ordered_json;
  json j;
  j["schema_version"] = kSummarySchemaVersion;
  j["status"] = status;
  j["message"] = message;

  json c;
  c["grid"] = {{"N1", cfg.grid.N1}, {"N2", cfg.grid.N2}, {"Nz", cfg.grid.Nz}, {"L1", cfg.grid.L1},
               {"L2", cfg.grid.L2}, {"b0", cfg.grid.b0}, {"dealias", cfg.grid.dealias}};
  c["time"] = {{"T", cfg.time.T}, {"dt", cfg.time.dt}};
  c["picard"] = {{"tol_N", cfg.picard.tol_N}, {"max_picard", cfg.picard.max_picard},
                 {"mode", to_string(cfg.picard.mode)}, {"closeness_cap", cfg.picard.closeness_cap}};
  c["initial"] = {{"u0", to_string(cfg.initial.u0)}, {"u0_amplitude", cfg.initial.u0_amplitude}};
  json modes = json::array();
  for (const auto& m : cfg.initial.eta) modes.push_back({m.m1, m.m2, m.amplitude});
  c["initial"]["eta"] = modes;
  c["seed"] = cfg.output.seed;
  j["config"] = c;

  if (report) {
    json r;
    r["converged"] = report->converged;
    r["sweep_count"] = report->sweep_count;
    r["nonlinear_residual"] = number(report->nonlinear_residual);
    r["ratio"] = number(report->ratio);
    json sweeps = json::array();
    for (const auto& s : report->sweeps)
      sweeps.push_back({{"sweep", s.sweep},
                        {"N_distance", number(s.N_distance)},
                        {"M_distance", number(s.M_distance)},
                        {"min_J", number(s.min_J)},
                        {"max_closeness", number(s.max_closeness)},
                        {"mean_drift", number(s.mean_drift)},
                        {"max_stokes_iterations", s.max_stokes_iterations}});
    r["sweeps"] = sweeps;
    r["step_sweeps"] = report->step_sweeps;
    j["picard"] = r;
  } else {
    j["picard"] = nullptr;
  }

  if (diag) {
    json d;
    d["energy_residual"] = number(diag->energy_residual);
    d["min_J"] = number(diag->min_J);
    d["div_residual"] = number(diag->div_residual);
    d["bottom_slip"] = number(diag->bottom_slip);
    d["norm_equiv_ratios"] = {number(diag->norm_equiv_ratios.first), number(diag->norm_equiv_ratios.second)};
    json lemmas = json::object();
    for (const auto& [name, chk] : diag->lemma_checks)
      lemmas[name] = {{"value", number(chk.value)}, {"threshold", chk.threshold}, {"kind", chk.kind}, {"pass", chk.pass}};
    d["lemma_checks"] = lemmas;
    const Functionals& f = diag->functionals;
    d["functionals"] = {{"E_up", number(f.E_up)},   {"D_up", number(f.D_up)},   {"K_up", number(f.K_up)},
                        {"E_eta", number(f.E_eta)}, {"D_eta", number(f.D_eta)}, {"K_eta", number(f.K_eta)},
                        {"Q_u", number(f.Q_u)},     {"truncations", f.truncations}};
    j["diagnostics"] = d;
  } else {
    j["diagnostics"] = nullptr;
  }
  return j.dump(2) + "\n";
}

OutputLock::OutputLock(const std::filesystem::path& dir) : path_(dir / ".slabflow.lock") {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (!f)
    throw ConfigError("output directory " + dir.string() + " is locked by another run (remove " +
                      path_.string() + " if no run is active)");
  std::fclose(f);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

}  // namespace slabflow
