// Command-line driver: phantom generation, forward simulation, time reversal,
// conjugate-gradient reconstruction, field comparison, and self tests.

#include "tpat/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace tpat;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitSelftest = 4;

struct CommonOpts {
  std::string config_path;
  std::string out_dir;  // overrides paths.out_dir
  std::optional<std::uint64_t> seed;
  std::optional<int> iters;
  std::string mode;  // "", "h0", "h1"
  bool quiet = false;
};

void emit_failure(int code, const std::string& message) {
  nlohmann::json j;
  j["status"] = "error";
  j["exit"] = code;
  j["message"] = message;
  std::cerr << j.dump() << "\n";
}

RunConfig load_config(const CommonOpts& o) {
  RunConfig cfg =
      o.config_path.empty() ? RunConfig{} : parse_config(o.config_path);
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (o.seed) cfg.noise_seed = *o.seed;
  if (o.iters) cfg.cg_k_max = *o.iters;
  if (o.mode == "h0") cfg.cg_mode = CgMode::H0;
  else if (o.mode == "h1") cfg.cg_mode = CgMode::H1;
  else if (!o.mode.empty())
    throw ConfigError("--mode must be h0 or h1, got '" + o.mode + "'");
  return cfg;
}

fs::path p0_path(const RunConfig& cfg) {
  return cfg.p0_path.empty() ? fs::path(cfg.out_dir) / "p0.field"
                             : fs::path(cfg.p0_path);
}

fs::path trace_path(const RunConfig& cfg) {
  return cfg.trace_path.empty() ? fs::path(cfg.out_dir) / "trace.txt"
                                : fs::path(cfg.trace_path);
}

std::string fmt_pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string iteration_csv(const ReconReport& rep) {
  std::ostringstream os;
  os << "iter,residual_norm,err_h1_pct,err_h0_pct,seconds\n";
  os.precision(17);
  for (const auto& it : rep.iterations)
    os << it.iter << ',' << it.residual_norm << ',' << it.err_h1_pct << ','
       << it.err_h0_pct << ',' << it.seconds << '\n';
  return os.str();
}

void print_error_table(const ReconReport& rep, std::ostream& out) {
  out << "Iter  H1-norm  H0-norm\n";
  for (const auto& it : rep.iterations) {
    if (std::isnan(it.err_h0_pct)) continue;
    out << it.iter << "     " << fmt_pct(it.err_h1_pct) << " %   "
        << fmt_pct(it.err_h0_pct) << " %\n";
  }
}

int cmd_phantom(const CommonOpts& o) {
  const RunConfig cfg = load_config(o);
  const Grid2D g = make_grid(cfg);
  const MediumFields m = make_medium(cfg, g);
  const Field p0 = make_phantom(cfg, g);
  fs::create_directories(cfg.out_dir);
  write_field(p0, p0_path(cfg));
  write_field(m.c, fs::path(cfg.out_dir) / "speed.field");
  pgm_export(p0, fs::path(cfg.out_dir) / "p0.pgm");
  pgm_export(m.c, fs::path(cfg.out_dir) / "speed.pgm");
  if (!o.quiet)
    std::cout << "wrote " << p0_path(cfg).string() << " and speed fields ("
              << g.nx << "x" << g.ny << ")\n";
  return 0;
}

int cmd_forward(const CommonOpts& o) {
  const RunConfig cfg = load_config(o);
  const Grid2D g = make_grid(cfg);
  const MediumFields m = make_medium(cfg, g);
  const fs::path p0file = p0_path(cfg);
  if (!fs::exists(p0file))
    throw ConfigError("paths.p0: initial profile not found: " +
                      p0file.string() + " (run the phantom subcommand first)");
  const Field p0 = read_field(p0file);
  if (!(p0.grid == g))
    throw ConfigError("paths.p0: grid does not match grid.n");

  const SolverConfig scfg = SolverConfig::create(cfg.tau, cfg.cfl, g, m.c);
  ForwardResult r = forward_solve(p0, m, scfg);
  if (cfg.noise_level > 0.0)
    add_trace_noise(r.trace, cfg.noise_level, cfg.noise_seed);

  fs::create_directories(cfg.out_dir);
  write_trace(r.trace, trace_path(cfg));

  std::ostringstream csv;
  csv << "# tau=" << cfg.tau << " cfl=" << cfg.cfl << " n=" << cfg.grid_n
      << " dt=" << scfg.dt << " epsilon=" << cfg.epsilon << "\n";
  csv << "step,t,energy,dissipation_rate,q_acoustic,q_thermal,q_thermal_"
         "weighted\n";
  csv.precision(17);
  for (std::size_t k = 0; k < r.diagnostics.size(); ++k) {
    const auto& d = r.diagnostics[k];
    csv << k << ',' << d.t << ',' << d.energy << ',' << d.diss_rate << ','
        << d.q_acoustic << ',' << d.q_thermal << ',' << d.q_thermal_weighted
        << '\n';
  }
  atomic_write_text(fs::path(cfg.out_dir) / "forward_diag.csv", csv.str());

  if (!o.quiet) {
    const double e0 = r.diagnostics.front().energy;
    const double et = r.diagnostics.back().energy;
    std::cout << "trace written to " << trace_path(cfg).string() << " ("
              << scfg.n_steps << " steps, dt = " << scfg.dt << ")\n"
              << "energy ratio E(tau)/E(0) = " << (e0 > 0 ? et / e0 : 0.0)
              << "\n";
  }
  return 0;
}

int cmd_estimate(const CommonOpts& o, bool full_reconstruction) {
  const RunConfig cfg = load_config(o);
  const Grid2D g = make_grid(cfg);
  const MediumFields m = make_medium(cfg, g);
  const fs::path trfile = trace_path(cfg);
  if (!fs::exists(trfile))
    throw ConfigError("paths.trace: trace not found: " + trfile.string() +
                      " (run the forward subcommand first)");
  const MeasurementTrace tr = read_trace(trfile);
  if (!(tr.grid == g)) throw ConfigError("paths.trace: grid mismatch");
  const SolverConfig scfg = SolverConfig::create(cfg.tau, cfg.cfl, g, m.c);
  if (tr.n_steps() != scfg.n_steps)
    throw ConfigError("paths.trace: time grid mismatch (trace has " +
                      std::to_string(tr.n_steps()) + " steps, config needs " +
                      std::to_string(scfg.n_steps) + ")");

  std::optional<Field> truth;
  if (!cfg.truth_path.empty()) {
    if (!fs::exists(cfg.truth_path))
      throw ConfigError("paths.truth: file not found: " + cfg.truth_path);
    truth = read_field(cfg.truth_path);
    if (!(truth->grid == g)) throw ConfigError("paths.truth: grid mismatch");
  }

  fs::create_directories(cfg.out_dir);
  const std::string stem = full_reconstruction ? "recon" : "tr_estimate";

  ReconReport rep;
  if (full_reconstruction) {
    CgOptions opt;
    opt.mode = cfg.cg_mode;
    opt.tol = cfg.cg_tol;
    opt.k_max = cfg.cg_k_max;
    opt.coarse_factor = cfg.coarse_factor();
    rep = reconstruct(tr, m, scfg, opt, truth ? &*truth : nullptr);
  } else {
    rep.estimate = time_reversal(tr, m, scfg);
    IterationRecord rec;
    rec.iter = 0;
    if (truth) {
      rec.err_h0_pct = relative_error_pct(rep.estimate, *truth, CgMode::H0);
      rec.err_h1_pct = relative_error_pct(rep.estimate, *truth, CgMode::H1);
    }
    rep.iterations.push_back(rec);
  }

  write_field(rep.estimate, fs::path(cfg.out_dir) / (stem + ".field"));
  pgm_export(rep.estimate, fs::path(cfg.out_dir) / (stem + ".pgm"));
  atomic_write_text(fs::path(cfg.out_dir) / (stem + "_errors.csv"),
                    iteration_csv(rep));

  if (!o.quiet) {
    std::cout << "estimate written to "
              << (fs::path(cfg.out_dir) / (stem + ".field")).string() << "\n";
    if (truth) print_error_table(rep, std::cout);
  }
  return 0;
}

int cmd_errors(const std::string& est_path, const std::string& truth_path) {
  const Field est = read_field(est_path);
  const Field truth = read_field(truth_path);
  std::cout << "H1: " << fmt_pct(relative_error_pct(est, truth, CgMode::H1))
            << " %\n"
            << "H0: " << fmt_pct(relative_error_pct(est, truth, CgMode::H0))
            << " %\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermoacoustic tomography: coupled pressure-temperature "
               "simulation and adjoint-based reconstruction"};
  app.require_subcommand(1);

  CommonOpts o;
  app.add_option("--config", o.config_path, "Configuration file");
  app.add_option("--out", o.out_dir, "Output directory (overrides config)");
  app.add_option("--seed", o.seed, "Noise seed (overrides config)");
  app.add_option("--iters", o.iters, "CG iteration cap (overrides config)");
  app.add_option("--mode", o.mode, "CG inner-product mode: h0 or h1");
  app.add_flag("--quiet", o.quiet, "Suppress progress output");

  auto* sub_phantom =
      app.add_subcommand("phantom", "Write the initial profile and speed fields");
  auto* sub_forward =
      app.add_subcommand("forward", "Simulate and record the boundary trace");
  auto* sub_tr = app.add_subcommand(
      "timereversal", "Purely acoustic time-reversal estimate from a trace");
  auto* sub_recon = app.add_subcommand(
      "reconstruct", "Conjugate-gradient reconstruction from a trace");
  auto* sub_errors =
      app.add_subcommand("errors", "Compare two field files in both norms");
  std::string est_path, truth_path;
  sub_errors->add_option("estimate", est_path, "Estimate field file")
      ->required();
  sub_errors->add_option("truth", truth_path, "Reference field file")
      ->required();
  auto* sub_selftest =
      app.add_subcommand("selftest", "Run the built-in numerical checks");

  for (auto* sub : {sub_phantom, sub_forward, sub_tr, sub_recon, sub_errors,
                    sub_selftest})
    sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sub_phantom->parsed()) return cmd_phantom(o);
    if (sub_forward->parsed()) return cmd_forward(o);
    if (sub_tr->parsed()) return cmd_estimate(o, false);
    if (sub_recon->parsed()) return cmd_estimate(o, true);
    if (sub_errors->parsed()) return cmd_errors(est_path, truth_path);
    if (sub_selftest->parsed()) {
      const bool ok = run_selftest(std::cout);
      if (!ok) {
        emit_failure(kExitSelftest, "selftest failed");
        return kExitSelftest;
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    emit_failure(kExitConfig, e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    emit_failure(kExitConfig, e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    emit_failure(kExitNumerical, e.what());
    return kExitNumerical;
  }
  return 0;
}
