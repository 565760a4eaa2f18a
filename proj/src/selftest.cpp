#include "tpat/io.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <random>

namespace tpat {

namespace {

constexpr double kPi = std::numbers::pi;

MediumFields reference_medium(const Grid2D& g, double epsilon = 0.1,
                              double alpha = 0.01) {
  MediumFields m;
  m.c = Field(g, Array2D::Constant(g.nx, g.ny, 1.0));
  m.alpha = Field(g, Array2D::Constant(g.nx, g.ny, alpha));
  m.gamma = gamma_from_speed(m.c);
  m.obs = BoundarySet::full_boundary(g);
  m.epsilon = epsilon;
  return m;
}

Field bandlimited_field(const Grid2D& g, int kmax, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  Array2D v = Array2D::Zero(g.nx, g.ny);
  for (int kx = 0; kx <= kmax; ++kx)
    for (int ky = 0; ky <= kmax; ++ky) {
      const double a = coef(rng);
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
          v(i, j) += a * std::cos(kx * kPi * g.x(i)) *
                     std::cos(ky * kPi * g.y(j));
    }
  return Field(g, std::move(v));
}

// sin modes, vanishing on the boundary (where the surface terms of the
// duality identity drop out, as they do for compactly supported profiles)
Field interior_bandlimited_field(const Grid2D& g, int kmax,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  Array2D v = Array2D::Zero(g.nx, g.ny);
  for (int kx = 1; kx <= kmax; ++kx)
    for (int ky = 1; ky <= kmax; ++ky) {
      const double a = coef(rng);
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
          v(i, j) += a * std::sin(kx * kPi * g.x(i)) *
                     std::sin(ky * kPi * g.y(j));
    }
  return Field(g, std::move(v));
}

BoundaryControl bandlimited_control(const MediumFields& m,
                                    const SolverConfig& cfg, const Grid2D& g,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  const double a0 = coef(rng), a1 = coef(rng), a2 = coef(rng);
  BoundaryControl eta = BoundaryControl::zero(m, cfg, g);
  for (int r = 0; r <= cfg.n_steps; ++r) {
    const double t = r * cfg.dt;
    const double envelope = std::sin(kPi * t / cfg.tau);
    for (std::size_t q = 0; q < eta.nodes.size(); ++q) {
      const double x = g.x(eta.nodes[q].i), y = g.y(eta.nodes[q].j);
      eta.values(r, Eigen::Index(q)) =
          envelope * (a0 + a1 * std::cos(kPi * x) + a2 * std::cos(kPi * y));
    }
  }
  return eta;
}

bool check_duality(std::ostream& log) {
  const Grid2D g = Grid2D::unit_square(33);
  const MediumFields m = reference_medium(g);
  const SolverConfig cfg = SolverConfig::create(2.0, 0.5, g, m.c);
  const Field p0 = interior_bandlimited_field(g, 2, 11);
  const BoundaryControl eta = bandlimited_control(m, cfg, g, 12);
  const double gap = duality_gap(p0, eta, m, cfg);
  log << "duality gap (33^2): " << std::setprecision(3) << gap * 100.0
      << "% (limit 5%)\n";
  return gap <= 0.05;
}

bool check_energy_monotonicity(std::ostream& log) {
  const Grid2D g = Grid2D::unit_square(33);
  const MediumFields m = reference_medium(g);
  const SolverConfig cfg = SolverConfig::create(2.0, 0.5, g, m.c);
  const Field p0 = shepp_logan(g);
  const ForwardResult r = forward_solve(p0, m, cfg);
  double worst = 0.0;
  for (std::size_t k = 1; k < r.diagnostics.size(); ++k) {
    const double prev = r.diagnostics[k - 1].energy;
    const double cur = r.diagnostics[k].energy;
    if (prev > 0.0) worst = std::max(worst, (cur - prev) / prev);
  }
  log << "energy per-step growth: " << std::setprecision(3) << worst
      << " (limit 1e-10)\n";
  return worst <= 1e-10;
}

bool check_eigenmode_order(std::ostream& log) {
  // Lossless standing mode cos(sqrt(2) pi t) cos(pi x) cos(pi y).
  auto run_error = [&](int n) {
    const Grid2D g = Grid2D::unit_square(n);
    MediumFields m = reference_medium(g, 0.0);
    m.gamma = Field(g);  // reflecting boundary
    const SolverConfig cfg = SolverConfig::create(1.0, 0.5, g, m.c);
    const Field p0 = Field::from_function(
        g, [](double x, double y) { return std::cos(kPi * x) * std::cos(kPi * y); });
    const ForwardResult r = forward_solve(p0, m, cfg, nullptr, false);
    const double amp = std::cos(std::sqrt(2.0) * kPi * cfg.tau);
    const Field exact(g, amp * p0.values);
    const Field diff(g, r.final_state.p_curr.values - exact.values);
    return norm_h0(diff);
  };
  const double e1 = run_error(17), e2 = run_error(33), e3 = run_error(65);
  const double o1 = std::log2(e1 / e2), o2 = std::log2(e2 / e3);
  log << "eigenmode convergence orders: " << std::setprecision(3) << o1 << ", "
      << o2 << " (limit 1.8)\n";
  return o1 >= 1.8 && o2 >= 1.8;
}

bool check_cg_envelope(std::ostream& log) {
  const Grid2D g = Grid2D::unit_square(33);
  // Diagonal positive operator with spectrum [1, 2].
  const Field d = Field::from_function(g, [](double x, double) { return 1.0 + x; });
  auto apply_N = [&](const Field& f) { return Field(g, d.values * f.values); };
  const Field zeta = bandlimited_field(g, 3, 21);
  const Field truth(g, zeta.values / d.values);

  CgOptions opt;
  opt.mode = CgMode::H0;
  opt.tol = 1e-10;
  opt.k_max = 60;
  const Field phi0(g);

  const double mlo = 1.0, mhi = 2.0;
  const double sigma = std::log((mhi + mlo) / (mhi - mlo));
  auto energy_err = [&](const Field& p) {
    const Field e(g, truth.values - p.values);
    return std::sqrt(inner_h0(e, apply_N(e)));
  };
  const double e0 = energy_err(phi0);
  bool ok = true;
  int iters = 0;
  cg_solve(apply_N, zeta, phi0, opt, nullptr, [&](int k, const Field& phi) {
    iters = k;
    if (energy_err(phi) > std::exp(-sigma * k) * e0 * (1.0 + 1e-12)) ok = false;
  });
  log << "cg envelope (sigma = " << std::setprecision(4) << sigma
      << "): " << (ok ? "holds" : "violated") << " over " << iters
      << " iterations\n";
  return ok;
}

}  // namespace

bool run_selftest(std::ostream& log) {
  struct Check {
    const char* name;
    bool (*fn)(std::ostream&);
  };
  const Check checks[] = {
      {"duality-gap", check_duality},
      {"energy-monotonicity", check_energy_monotonicity},
      {"eigenmode-order", check_eigenmode_order},
      {"cg-envelope", check_cg_envelope},
  };
  bool all_ok = true;
  for (const auto& c : checks) {
    bool ok = false;
    try {
      ok = c.fn(log);
    } catch (const std::exception& e) {
      log << c.name << " raised: " << e.what() << "\n";
      ok = false;
    }
    log << (ok ? "[PASS] " : "[FAIL] ") << c.name << "\n";
    all_ok = all_ok && ok;
  }
  return all_ok;
}

}  // namespace tpat
