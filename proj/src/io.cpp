#include "tpat/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <system_error>

namespace tpat {

namespace {

std::string trim(std::string s) {
  const auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && issp(s.front())) s.erase(s.begin());
  while (!s.empty() && issp(s.back())) s.pop_back();
  return s;
}

double parse_double(const std::string& tok, const std::string& ctx) {
  double v = 0.0;
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e)
    throw ConfigError(ctx + ": invalid number '" + tok + "'");
  return v;
}

long long parse_int(const std::string& tok, const std::string& ctx) {
  long long v = 0;
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e)
    throw ConfigError(ctx + ": invalid integer '" + tok + "'");
  return v;
}

std::string format_double(double v) {
  char buf[40];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, std::size_t(n));
}

double read_double_token(std::istream& in, const std::string& ctx) {
  std::string tok;
  if (!(in >> tok)) throw std::runtime_error(ctx + ": unexpected end of file");
  double v = 0.0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw std::runtime_error(ctx + ": bad value '" + tok + "'");
  return v;
}

/// Writes through a sibling temp file and renames, so failed runs never leave
/// partial outputs behind.
class AtomicWriter {
 public:
  explicit AtomicWriter(const std::filesystem::path& path)
      : final_(path), tmp_(path.string() + ".tmp") {
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot open " + tmp_.string());
  }
  ~AtomicWriter() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }
  std::ofstream& stream() { return out_; }
  void commit() {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed: " + tmp_.string());
    out_.close();
    std::filesystem::rename(tmp_, final_);
    committed_ = true;
  }

 private:
  std::filesystem::path final_, tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

}  // namespace

int RunConfig::coarse_factor() const {
  const int coarse = grid_coarse_n > 0 ? grid_coarse_n : (grid_n + 1) / 2;
  int factor = 1;
  int n = grid_n;
  while (n > coarse) {
    if ((n - 1) % 2 != 0) break;
    n = (n - 1) / 2 + 1;
    factor *= 2;
  }
  if (n != coarse)
    throw ConfigError("grid.coarse_n: " + std::to_string(coarse) +
                      " is not a power-of-two coarsening of " +
                      std::to_string(grid_n));
  return factor;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, path.string());
}

RunConfig parse_config(std::istream& in, const std::string& name) {
  RunConfig cfg;
  std::map<std::string, bool> seen;
  std::string line;
  int lineno = 0;

  auto ctx = [&](const std::string& key) {
    return name + ":" + std::to_string(lineno) + ": " + key;
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(name + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError(name + ":" + std::to_string(lineno) +
                        ": empty key or value");
    if (seen[key])
      throw ConfigError(name + ":" + std::to_string(lineno) +
                        ": duplicate key '" + key + "'");
    seen[key] = true;

    auto enum_error = [&](const std::string& allowed) -> ConfigError {
      return ConfigError(ctx(key) + ": invalid value '" + val + "' (expected " +
                         allowed + ")");
    };

    if (key == "grid.n") {
      cfg.grid_n = int(parse_int(val, ctx(key)));
    } else if (key == "grid.coarse_n") {
      cfg.grid_coarse_n = int(parse_int(val, ctx(key)));
    } else if (key == "medium.speed") {
      if (val == "constant") cfg.speed = SpeedSpec::Constant;
      else if (val == "layered") cfg.speed = SpeedSpec::Layered;
      else if (val == "file") cfg.speed = SpeedSpec::File;
      else throw enum_error("constant|layered|file");
    } else if (key == "medium.c0") {
      cfg.c0 = parse_double(val, ctx(key));
    } else if (key == "medium.layer_value") {
      cfg.layer_value = parse_double(val, ctx(key));
    } else if (key == "medium.layer_cx") {
      cfg.layer.cx = parse_double(val, ctx(key));
    } else if (key == "medium.layer_cy") {
      cfg.layer.cy = parse_double(val, ctx(key));
    } else if (key == "medium.layer_inner_a") {
      cfg.layer.a_inner = parse_double(val, ctx(key));
    } else if (key == "medium.layer_inner_b") {
      cfg.layer.b_inner = parse_double(val, ctx(key));
    } else if (key == "medium.layer_outer_a") {
      cfg.layer.a_outer = parse_double(val, ctx(key));
    } else if (key == "medium.layer_outer_b") {
      cfg.layer.b_outer = parse_double(val, ctx(key));
    } else if (key == "medium.speed_file") {
      cfg.speed_file = val;
    } else if (key == "medium.alpha") {
      cfg.alpha_spec = AlphaSpec::Constant;
      cfg.alpha = parse_double(val, ctx(key));
    } else if (key == "medium.alpha_file") {
      cfg.alpha_spec = AlphaSpec::File;
      cfg.alpha_file = val;
    } else if (key == "medium.epsilon") {
      cfg.epsilon = parse_double(val, ctx(key));
    } else if (key == "medium.gamma") {
      if (val == "constant") cfg.gamma_spec = GammaSpec::Constant;
      else if (val == "inverse_c") cfg.gamma_spec = GammaSpec::InverseC;
      else if (val == "file") cfg.gamma_spec = GammaSpec::File;
      else throw enum_error("constant|inverse_c|file");
    } else if (key == "medium.gamma0") {
      cfg.gamma0 = parse_double(val, ctx(key));
    } else if (key == "medium.gamma_file") {
      cfg.gamma_file = val;
    } else if (key == "obs.region") {
      if (val == "full") cfg.obs = ObsSpec::Full;
      else if (val == "sides") cfg.obs = ObsSpec::Sides;
      else if (val == "file") cfg.obs = ObsSpec::File;
      else throw enum_error("full|sides|file");
    } else if (key == "obs.sides") {
      cfg.obs_left = cfg.obs_right = cfg.obs_bottom = cfg.obs_top = false;
      std::stringstream ss(val);
      std::string side;
      while (std::getline(ss, side, ',')) {
        side = trim(side);
        if (side == "left") cfg.obs_left = true;
        else if (side == "right") cfg.obs_right = true;
        else if (side == "bottom") cfg.obs_bottom = true;
        else if (side == "top") cfg.obs_top = true;
        else throw ConfigError(ctx(key) + ": unknown side '" + side + "'");
      }
    } else if (key == "obs.mask_file") {
      cfg.obs_mask_file = val;
    } else if (key == "time.tau") {
      cfg.tau = parse_double(val, ctx(key));
    } else if (key == "time.cfl") {
      cfg.cfl = parse_double(val, ctx(key));
    } else if (key == "cg.mode") {
      if (val == "h0") cfg.cg_mode = CgMode::H0;
      else if (val == "h1") cfg.cg_mode = CgMode::H1;
      else throw enum_error("h0|h1");
    } else if (key == "cg.tol") {
      cfg.cg_tol = parse_double(val, ctx(key));
    } else if (key == "cg.k_max") {
      cfg.cg_k_max = int(parse_int(val, ctx(key)));
    } else if (key == "phantom.kind") {
      if (val == "shepp_logan") cfg.phantom = PhantomKind::SheppLogan;
      else if (val == "gaussian") cfg.phantom = PhantomKind::Gaussian;
      else throw enum_error("shepp_logan|gaussian");
    } else if (key == "phantom.scale") {
      cfg.phantom_scale = parse_double(val, ctx(key));
    } else if (key == "phantom.sigma") {
      cfg.phantom_sigma = parse_double(val, ctx(key));
    } else if (key == "noise.level") {
      cfg.noise_level = parse_double(val, ctx(key));
    } else if (key == "noise.seed") {
      cfg.noise_seed = std::uint64_t(parse_int(val, ctx(key)));
    } else if (key == "paths.out_dir") {
      cfg.out_dir = val;
    } else if (key == "paths.p0") {
      cfg.p0_path = val;
    } else if (key == "paths.trace") {
      cfg.trace_path = val;
    } else if (key == "paths.truth") {
      cfg.truth_path = val;
    } else {
      throw ConfigError(name + ":" + std::to_string(lineno) +
                        ": unknown key '" + key + "'");
    }
  }

  // Range validation, naming the offending key.
  auto require = [&](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(name + ": " + msg);
  };
  require(cfg.grid_n >= 3, "grid.n must be at least 3");
  require(cfg.grid_coarse_n == 0 || cfg.grid_coarse_n >= 3,
          "grid.coarse_n must be at least 3");
  require(cfg.c0 > 0.0, "medium.c0 must be positive");
  require(cfg.layer_value > 0.0, "medium.layer_value must be positive");
  require(cfg.alpha_spec != AlphaSpec::Constant || cfg.alpha > 0.0,
          "medium.alpha must be positive");
  require(cfg.epsilon >= 0.0, "medium.epsilon must be nonnegative");
  require(cfg.gamma0 >= 0.0, "medium.gamma0 must be nonnegative");
  require(cfg.tau > 0.0, "time.tau must be positive");
  require(cfg.cfl > 0.0 && cfg.cfl <= 1.0, "time.cfl must lie in (0, 1]");
  require(cfg.cg_tol > 0.0, "cg.tol must be positive");
  require(cfg.cg_k_max >= 1, "cg.k_max must be at least 1");
  require(cfg.phantom_scale > 0.0, "phantom.scale must be positive");
  require(cfg.phantom_sigma > 0.0, "phantom.sigma must be positive");
  require(cfg.noise_level >= 0.0, "noise.level must be nonnegative");
  require(cfg.speed != SpeedSpec::File || !cfg.speed_file.empty(),
          "medium.speed_file is required when medium.speed = file");
  require(cfg.alpha_spec != AlphaSpec::File || !cfg.alpha_file.empty(),
          "medium.alpha_file is required for per-node diffusivity");
  require(cfg.gamma_spec != GammaSpec::File || !cfg.gamma_file.empty(),
          "medium.gamma_file is required when medium.gamma = file");
  require(cfg.obs != ObsSpec::File || !cfg.obs_mask_file.empty(),
          "obs.mask_file is required when obs.region = file");
  cfg.coarse_factor();  // validates the fine/coarse grid pairing
  return cfg;
}

Grid2D make_grid(const RunConfig& cfg) { return Grid2D::unit_square(cfg.grid_n); }

namespace {

Field read_field_checked(const std::string& path, const Grid2D& g,
                         const std::string& key) {
  if (!std::filesystem::exists(path))
    throw ConfigError(key + ": file does not exist: " + path);
  Field f = read_field(path);
  if (!(f.grid == g))
    throw ConfigError(key + ": grid of " + path + " does not match grid.n");
  return f;
}

}  // namespace

MediumFields make_medium(const RunConfig& cfg, const Grid2D& g) {
  MediumFields m;
  switch (cfg.speed) {
    case SpeedSpec::Constant:
      m.c = Field(g, Array2D::Constant(g.nx, g.ny, cfg.c0));
      break;
    case SpeedSpec::Layered:
      m.c = layered_speed(g, cfg.c0, cfg.layer_value, cfg.layer);
      break;
    case SpeedSpec::File:
      m.c = read_field_checked(cfg.speed_file, g, "medium.speed_file");
      break;
  }

  switch (cfg.alpha_spec) {
    case AlphaSpec::Constant:
      m.alpha = Field(g, Array2D::Constant(g.nx, g.ny, cfg.alpha));
      break;
    case AlphaSpec::File:
      m.alpha = read_field_checked(cfg.alpha_file, g, "medium.alpha_file");
      break;
  }

  switch (cfg.gamma_spec) {
    case GammaSpec::InverseC:
      m.gamma = gamma_from_speed(m.c);
      break;
    case GammaSpec::Constant: {
      m.gamma = Field(g);
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
          if (g.is_boundary(i, j)) m.gamma.values(i, j) = cfg.gamma0;
      break;
    }
    case GammaSpec::File:
      m.gamma = read_field_checked(cfg.gamma_file, g, "medium.gamma_file");
      break;
  }

  switch (cfg.obs) {
    case ObsSpec::Full:
      m.obs = BoundarySet::full_boundary(g);
      break;
    case ObsSpec::Sides:
      m.obs = BoundarySet::sides(g, cfg.obs_left, cfg.obs_right, cfg.obs_bottom,
                                 cfg.obs_top);
      break;
    case ObsSpec::File: {
      const Field mask =
          read_field_checked(cfg.obs_mask_file, g, "obs.mask_file");
      m.obs = BoundarySet::from_mask(g, mask.values);
      break;
    }
  }

  m.epsilon = cfg.epsilon;
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid medium: ") + e.what());
  }
  return m;
}

Field make_phantom(const RunConfig& cfg, const Grid2D& g) {
  switch (cfg.phantom) {
    case PhantomKind::Gaussian:
      return gaussian_blob(g, 0.5, 0.5, cfg.phantom_sigma, cfg.phantom_scale);
    case PhantomKind::SheppLogan:
    default:
      return shepp_logan(g, cfg.phantom_scale);
  }
}

// --- field files ---------------------------------------------------------------

void write_field(const Field& f, const std::filesystem::path& path) {
  AtomicWriter w(path);
  auto& out = w.stream();
  out << "THERMOAC-FIELD v1\n";
  out << "nx " << f.grid.nx << "\n";
  out << "ny " << f.grid.ny << "\n";
  out << "h " << format_double(f.grid.h) << "\n";
  for (int j = 0; j < f.grid.ny; ++j) {
    for (int i = 0; i < f.grid.nx; ++i) {
      if (i) out << ' ';
      out << format_double(f.values(i, j));
    }
    out << '\n';
  }
  w.commit();
}

Field read_field(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open field file " + path.string());
  std::string magic, version;
  in >> magic >> version;
  if (magic != "THERMOAC-FIELD" || version != "v1")
    throw std::runtime_error(path.string() + ": not a THERMOAC-FIELD v1 file");
  std::string key;
  int nx = 0, ny = 0;
  double h = 0.0;
  for (int k = 0; k < 3; ++k) {
    in >> key;
    if (key == "nx") in >> nx;
    else if (key == "ny") in >> ny;
    else if (key == "h") h = read_double_token(in, path.string());
    else throw std::runtime_error(path.string() + ": unexpected header key '" +
                                  key + "'");
  }
  if (nx < 3 || ny < 3 || !(h > 0.0))
    throw std::runtime_error(path.string() + ": malformed header");
  Grid2D g(nx, ny, h);
  Array2D v(nx, ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      v(i, j) = read_double_token(in, path.string());
  return Field(g, std::move(v));
}

// --- trace files --------------------------------------------------------------

void write_trace(const MeasurementTrace& tr, const std::filesystem::path& path) {
  AtomicWriter w(path);
  auto& out = w.stream();
  out << "THERMOAC-TRACE v1\n";
  out << "n_steps " << tr.n_steps() << "\n";
  out << "dt " << format_double(tr.dt) << "\n";
  out << "nx " << tr.grid.nx << "\n";
  out << "ny " << tr.grid.ny << "\n";
  out << "h " << format_double(tr.grid.h) << "\n";
  out << "n_nodes " << tr.nodes.size() << "\n";
  out << "nodes i j x y w\n";
  for (const auto& n : tr.nodes)
    out << n.i << ' ' << n.j << ' ' << format_double(tr.grid.x(n.i)) << ' '
        << format_double(tr.grid.y(n.j)) << ' ' << format_double(n.w) << '\n';
  out << "values\n";
  for (Eigen::Index r = 0; r < tr.values.rows(); ++r) {
    for (Eigen::Index q = 0; q < tr.values.cols(); ++q) {
      if (q) out << ',';
      out << format_double(tr.values(r, q));
    }
    out << '\n';
  }
  w.commit();
}

MeasurementTrace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file " + path.string());
  std::string magic, version;
  in >> magic >> version;
  if (magic != "THERMOAC-TRACE" || version != "v1")
    throw std::runtime_error(path.string() + ": not a THERMOAC-TRACE v1 file");

  MeasurementTrace tr;
  int n_steps = -1, nx = 0, ny = 0, n_nodes = -1;
  double h = 0.0;
  std::string key;
  for (int k = 0; k < 6; ++k) {
    in >> key;
    if (key == "n_steps") in >> n_steps;
    else if (key == "dt") tr.dt = read_double_token(in, path.string());
    else if (key == "nx") in >> nx;
    else if (key == "ny") in >> ny;
    else if (key == "h") h = read_double_token(in, path.string());
    else if (key == "n_nodes") in >> n_nodes;
    else throw std::runtime_error(path.string() + ": unexpected header key '" +
                                  key + "'");
  }
  if (n_steps < 1 || n_nodes < 1 || nx < 3 || ny < 3 || !(h > 0.0) ||
      !(tr.dt > 0.0))
    throw std::runtime_error(path.string() + ": malformed header");
  tr.grid = Grid2D(nx, ny, h);

  std::string line;
  in >> key;  // "nodes"
  if (key != "nodes")
    throw std::runtime_error(path.string() + ": missing node table");
  std::getline(in, line);  // rest of the "nodes i j x y w" line
  tr.nodes.resize(std::size_t(n_nodes));
  for (auto& n : tr.nodes) {
    double x, y;
    in >> n.i >> n.j >> x >> y >> n.w;
    if (!in) throw std::runtime_error(path.string() + ": bad node table");
  }
  in >> key;
  if (key != "values")
    throw std::runtime_error(path.string() + ": missing values section");
  std::getline(in, line);

  tr.values.resize(n_steps + 1, n_nodes);
  for (int r = 0; r <= n_steps; ++r) {
    if (!std::getline(in, line))
      throw std::runtime_error(path.string() + ": truncated values section");
    std::stringstream ss(line);
    std::string tok;
    for (int q = 0; q < n_nodes; ++q) {
      if (!std::getline(ss, tok, ','))
        throw std::runtime_error(path.string() + ": short row " +
                                 std::to_string(r));
      tok = trim(tok);
      double v = 0.0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || p != tok.data() + tok.size())
        throw std::runtime_error(path.string() + ": bad value '" + tok + "'");
      tr.values(r, q) = v;
    }
  }
  if (!tr.values.allFinite())
    throw std::runtime_error(path.string() + ": non-finite trace values");
  return tr;
}

// --- PGM ------------------------------------------------------------------------

void pgm_export(const Field& f, const std::filesystem::path& path) {
  const double lo = f.values.minCoeff();
  const double hi = f.values.maxCoeff();
  const double span = hi - lo;

  AtomicWriter w(path);
  auto& out = w.stream();
  out << "P5\n# range min=" << format_double(lo)
      << " max=" << format_double(hi) << "\n"
      << f.grid.nx << ' ' << f.grid.ny << "\n65535\n";
  for (int j = f.grid.ny - 1; j >= 0; --j) {
    for (int i = 0; i < f.grid.nx; ++i) {
      const double t = span > 0.0 ? (f.values(i, j) - lo) / span : 0.0;
      const auto v = std::uint16_t(std::lround(t * 65535.0));
      const unsigned char bytes[2] = {(unsigned char)(v >> 8),
                                      (unsigned char)(v & 0xff)};
      out.write(reinterpret_cast<const char*>(bytes), 2);
    }
  }
  w.commit();
}

void atomic_write_text(const std::filesystem::path& path,
                       const std::string& content) {
  AtomicWriter w(path);
  w.stream() << content;
  w.commit();
}

void add_trace_noise(MeasurementTrace& tr, double level, std::uint64_t seed) {
  if (level <= 0.0) return;
  const double rms = std::sqrt(tr.values.squaredNorm() /
                               double(tr.values.rows() * tr.values.cols()));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, level * rms);
  for (Eigen::Index r = 0; r < tr.values.rows(); ++r)
    for (Eigen::Index q = 0; q < tr.values.cols(); ++q)
      tr.values(r, q) += dist(rng);
}

}  // namespace tpat
