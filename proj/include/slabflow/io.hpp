#pragma once

// On-disk artifacts: binary field dumps, the diagnostics CSV, the JSON
// summary and the per-directory run lock.
//
// Dump layout (little-endian): "SLF1", u32 N1, N2, Nz, u32 component count,
// f64 L1, L2, b0, t, then f64 values ordered (component, x1, x2, x3) with x3
// running fastest over the Chebyshev nodes from the surface down. Surface
// fields are written with Nz = 1.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "slabflow/config.hpp"
#include "slabflow/diagnostics.hpp"

namespace slabflow {

struct FieldDump {
  std::uint32_t n1 = 0, n2 = 0, nz = 0;
  std::uint32_t components = 0;
  double L1 = 0.0, L2 = 0.0, b0 = 0.0, t = 0.0;
  std::vector<double> values;

  bool operator==(const FieldDump&) const = default;
};

FieldDump make_dump(const std::vector<SlabField>& fields, double t);
FieldDump make_dump(const SurfaceField& field, double t);
/// Component c as a slab field on a grid matching the dump.
SlabField dump_component(const FieldDump& dump, const GridPtr& grid, int c);

void write_dump(const std::filesystem::path& path, const FieldDump& dump);
/// Throws ConfigError on a bad magic, truncated file or trailing bytes.
FieldDump read_dump(const std::filesystem::path& path);

/// Column header of the diagnostics time series.
inline constexpr const char* kCsvHeader = "t,min_J,energy,div_residual,eta_amplitude,picard_sweeps";

struct CsvRow {
  double t = 0.0;
  double min_J = 0.0;
  double energy = 0.0;         // 1/2 int J |u|^2
  double div_residual = 0.0;   // max |div_A u| over interior nodes
  double eta_amplitude = 0.0;  // max |eta|
  int picard_sweeps = 0;
};

/// One row per time node of a Picard result.
std::vector<CsvRow> diagnostics_rows(const PicardResult& result, const InitialData& data);
/// Rows printed with 17 significant digits so equal runs give equal bytes.
void write_csv(std::ostream& out, const std::vector<CsvRow>& rows);

inline constexpr int kSummarySchemaVersion = 1;

/// Versioned JSON summary; report and diagnostics may be absent on failure.
std::string summary_json(const RunConfig& cfg, const std::string& status, const std::string& message,
                         const PicardReport* report, const DiagnosticsReport* diag);

/// Exclusive lock file in an output directory, removed on destruction.
class OutputLock {
 public:
  /// Creates the directory if needed; throws ConfigError if another run holds it.
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace slabflow
