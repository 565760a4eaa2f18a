#pragma once

#include "tpat/forward.hpp"
#include "tpat/inversion.hpp"
#include "tpat/medium.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace tpat {

/// Thrown for configuration syntax or validation problems; maps to exit
/// code 2 in the command-line tool.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class SpeedSpec { Constant, Layered, File };
enum class GammaSpec { Constant, InverseC, File };
enum class AlphaSpec { Constant, File };
enum class ObsSpec { Full, Sides, File };
enum class PhantomKind { SheppLogan, Gaussian };

/// Parsed run configuration. Flat `key = value` file with dotted section
/// prefixes, `#` comments, unknown keys rejected.
struct RunConfig {
  int grid_n = 257;
  int grid_coarse_n = 0;  // 0: derived as (grid_n + 1) / 2

  SpeedSpec speed = SpeedSpec::Constant;
  double c0 = 1.0;
  double layer_value = 1.5;
  AnnulusSpec layer;
  std::string speed_file;

  AlphaSpec alpha_spec = AlphaSpec::Constant;
  double alpha = 0.01;
  std::string alpha_file;

  double epsilon = 0.1;

  GammaSpec gamma_spec = GammaSpec::InverseC;
  double gamma0 = 1.0;
  std::string gamma_file;

  ObsSpec obs = ObsSpec::Full;
  bool obs_left = true, obs_right = true, obs_bottom = true, obs_top = true;
  std::string obs_mask_file;

  double tau = 2.0;
  double cfl = 0.5;

  CgMode cg_mode = CgMode::H0;
  double cg_tol = 1e-6;
  int cg_k_max = 50;

  PhantomKind phantom = PhantomKind::SheppLogan;
  double phantom_scale = 1.0;
  double phantom_sigma = 0.12;

  double noise_level = 0.0;
  std::uint64_t noise_seed = 0;

  std::string out_dir = "out";
  std::string p0_path;     // defaults to <out_dir>/p0.field when empty
  std::string trace_path;  // defaults to <out_dir>/trace.txt when empty
  std::string truth_path;  // optional ground truth for error tables

  int coarse_factor() const;
};

RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config(std::istream& in, const std::string& name = "<config>");

/// Builds the grid and material fields described by the configuration.
/// Referenced files are read here; missing files raise ConfigError.
Grid2D make_grid(const RunConfig& cfg);
MediumFields make_medium(const RunConfig& cfg, const Grid2D& g);
Field make_phantom(const RunConfig& cfg, const Grid2D& g);

// --- file formats ------------------------------------------------------------
// Field files: `THERMOAC-FIELD v1` magic, nx/ny/h key-value lines, then ny
// rows of nx values (17 significant digits, locale independent). Trace files:
// `THERMOAC-TRACE v1` magic, n_steps/dt/n_nodes headers, node table, then one
// comma-separated row per time level. All writers go through a temporary file
// and an atomic rename.

void write_field(const Field& f, const std::filesystem::path& path);
Field read_field(const std::filesystem::path& path);

void write_trace(const MeasurementTrace& tr, const std::filesystem::path& path);
MeasurementTrace read_trace(const std::filesystem::path& path);

/// 16-bit binary PGM with linear min-max mapping; the data range is recorded
/// in a header comment. Rows run from the top of the domain (largest y) down.
void pgm_export(const Field& f, const std::filesystem::path& path);

/// Adds seeded Gaussian noise with standard deviation level * rms(trace).
void add_trace_noise(MeasurementTrace& tr, double level, std::uint64_t seed);

/// Writes `content` through a temp file and an atomic rename.
void atomic_write_text(const std::filesystem::path& path,
                       const std::string& content);

/// Quick numerical self-checks on a small grid (duality gap, energy
/// monotonicity, eigenmode convergence order, conjugate-gradient envelope).
/// Prints one line per check; returns false when any check fails.
bool run_selftest(std::ostream& log);

}  // namespace tpat
