#include "tpat/forward.hpp"

#include <cmath>
#include <sstream>

namespace tpat {

namespace {

Eigen::VectorXd trapezoid_weights(int n, double h) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, h);
  w(0) = 0.5 * h;
  w(n - 1) = 0.5 * h;
  return w;
}

// sum over all nodes of quadrature weight * f
double weighted_sum(const Array2D& f, const Grid2D& g) {
  const Eigen::VectorXd wx = trapezoid_weights(g.nx, g.h);
  const Eigen::VectorXd wy = trapezoid_weights(g.ny, g.h);
  return wx.dot(f.matrix() * wy);
}

// arc-length weight of a boundary node on the full boundary
double arc_weight(const Grid2D& g, int i, int j) {
  double w = 0.0;
  if (j == 0 || j == g.ny - 1) w += g.h;
  if (i == 0 || i == g.nx - 1) w += g.h;
  if ((i == 0 || i == g.nx - 1) && (j == 0 || j == g.ny - 1)) w -= g.h;
  return w;
}

}  // namespace

SolverConfig SolverConfig::create(double tau, double cfl, const Grid2D& grid,
                                  const Field& c) {
  if (!(tau > 0.0)) throw std::invalid_argument("SolverConfig: tau must be > 0");
  if (!(cfl > 0.0) || cfl > 1.0)
    throw std::invalid_argument("SolverConfig: cfl must lie in (0, 1]");
  if (!(c.grid == grid))
    throw std::invalid_argument("SolverConfig: speed field grid mismatch");
  const double cmax = c.values.maxCoeff();
  const double dt_bound = cfl * grid.h / (std::sqrt(2.0) * cmax);
  SolverConfig cfg;
  cfg.tau = tau;
  cfg.cfl = cfl;
  cfg.n_steps = std::max(1, int(std::ceil(tau / dt_bound - 1e-12)));
  cfg.dt = tau / cfg.n_steps;
  return cfg;
}

// --- workspace ---------------------------------------------------------------
//
// Scheme. Pressure: leapfrog with the impedance ghost closure folded into a
// diagonal operator D = c^-2/dt^2 + G/(2dt), G = 2 s gamma / h per boundary
// node with s exposed sides. Temperature: Crank-Nicolson. The wave equation
// takes its coupling source eps c^2 lap(theta) at the Crank-Nicolson midpoint
// theta_bar = (theta_new + theta_old)/2; together with the centered pressure
// rate eps (p_new - p_prev)/(2dt) in the heat equation, the coupling terms
// cancel exactly in the discrete energy balance, which makes the energy
// nonincreasing step by step up to rounding. Eliminating p_new from the pair
// of update equations leaves a single constant-coefficient solve per step:
//
//   (I + diag(dt alpha/2 + eps^2 Dinv/4) A) theta_bar
//        = theta + (eps/4) (a - p_prev),
//
// where A is the negative mirror-closed Laplacian, Dinv = dt^2 c^2/(1 + b),
// b = dt c^2 s gamma / h, and a is the gamma-adjusted leapfrog predictor
// without the coupling source. Then theta_new = 2 theta_bar - theta and
// p_new = a + eps Dinv lap(theta_bar).
//
// The adjoint march uses the same reduction with its own coupling constant
// (eps^2/2 instead of eps^2/4), hence the second factorization.

ThermoWorkspace::ThermoWorkspace(const MediumFields& m, const SolverConfig& cfg)
    : grid_(m.c.grid), dt_(cfg.dt) {
  if (!(cfg.dt > 0.0))
    throw std::invalid_argument("ThermoWorkspace: dt must be positive");
  const Grid2D& g = grid_;
  const int nx = g.nx, ny = g.ny;
  const double dt = cfg.dt, h = g.h;

  d_inv_.resize(nx, ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double c2 = m.c.values(i, j) * m.c.values(i, j);
      const double b =
          dt * c2 * g.exposed_sides(i, j) * m.gamma.values(i, j) / h;
      d_inv_(i, j) = dt * dt * c2 / (1.0 + b);
    }

  const Array2D k_forward =
      0.5 * dt * m.alpha.values + 0.25 * m.epsilon * m.epsilon * d_inv_;
  const Array2D k_adjoint =
      0.5 * dt * m.alpha.values + 0.5 * m.epsilon * m.epsilon * d_inv_;
  factor(k_forward, forward_);
  if (m.epsilon == 0.0) {
    adjoint_ = forward_;  // identical operator
  } else {
    factor(k_adjoint, adjoint_);
  }
}

void ThermoWorkspace::factor(const Array2D& k, HeatSolve& hs) {
  const Grid2D& g = grid_;
  const int nx = g.nx, ny = g.ny;
  const double ih2 = 1.0 / (g.h * g.h);
  const Eigen::VectorXd wx = trapezoid_weights(nx, g.h);
  const Eigen::VectorXd wy = trapezoid_weights(ny, g.h);

  // (I + diag(k) A) x = rhs in the symmetrized form
  // (W diag(1/k) + W A) x = W diag(1/k) rhs; W A is symmetric because the
  // mirror-closed Laplacian is self-adjoint under the trapezoid weights.
  hs.w_over_k.resize(nx, ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) hs.w_over_k(i, j) = wx(i) * wy(j) / k(i, j);

  auto id = [&](int i, int j) { return i + std::ptrdiff_t(j) * nx; };
  auto mirror = [](int t, int n) { return t < 0 ? 1 : (t >= n ? n - 2 : t); };
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(std::size_t(5) * nx * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double w = wx(i) * wy(j);
      const auto r = id(i, j);
      trips.emplace_back(r, r, hs.w_over_k(i, j) + w * 4.0 * ih2);
      const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
      for (const auto& t : nb)
        trips.emplace_back(r, id(mirror(t[0], nx), mirror(t[1], ny)), -w * ih2);
    }
  }
  Eigen::SparseMatrix<double> S(nx * std::ptrdiff_t(ny), nx * std::ptrdiff_t(ny));
  S.setFromTriplets(trips.begin(), trips.end());
  hs.ldlt = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
  hs.ldlt->compute(S);
  if (hs.ldlt->info() != Eigen::Success)
    throw std::runtime_error("ThermoWorkspace: factorization failed");
}

Array2D ThermoWorkspace::solve(const HeatSolve& hs, const Array2D& rhs) const {
  Array2D scaled = hs.w_over_k * rhs;
  Eigen::Map<const Eigen::VectorXd> b(scaled.data(), scaled.size());
  Eigen::VectorXd x = hs.ldlt->solve(b);
  return Eigen::Map<const Array2D>(x.data(), grid_.nx, grid_.ny);
}

// --- time stepping -----------------------------------------------------------

ThermoacousticState init_state(const Field& p0, const MediumFields& m,
                               const SolverConfig& cfg) {
  require_same_grid(p0, m.c, "init_state");
  require_finite(p0.values, "init_state p0");

  ThermoacousticState s;
  s.dt = cfg.dt;
  s.p_curr = p0;
  s.theta = Field(p0.grid, m.epsilon * p0.values);

  // Fictitious level at t = -dt. With p1 = 0 the Taylor expansion gives
  // p(-dt) = p0 + (dt^2/2) c^2 lap(p0 + eps theta0).
  Array2D src = p0.values + m.epsilon * s.theta.values;
  Array2D lap;
  laplacian_into(src, p0.grid.h, lap);
  s.p_prev = Field(
      p0.grid, p0.values + 0.5 * cfg.dt * cfg.dt * m.c.values.square() * lap);
  return s;
}

void step(ThermoacousticState& s, const MediumFields& m,
          const SolverConfig& cfg, ThermoWorkspace& ws) {
  const Grid2D& g = s.p_curr.grid;
  const double dt = cfg.dt, h = g.h;
  const int nx = g.nx, ny = g.ny;
  const double eps = m.epsilon;
  const Array2D& cv = m.c.values;

  // gamma-adjusted leapfrog predictor (coupling source not yet applied)
  Array2D lap(nx, ny);
  laplacian_into(s.p_curr.values, h, lap);
  Array2D a =
      2.0 * s.p_curr.values - s.p_prev.values + (dt * dt) * cv.square() * lap;
  auto impedance_fix = [&](int i, int j) {
    const double gv = m.gamma.values(i, j);
    if (gv == 0.0) return;
    const double b = dt * cv(i, j) * cv(i, j) * g.exposed_sides(i, j) * gv / h;
    a(i, j) = (a(i, j) + b * s.p_prev.values(i, j)) / (1.0 + b);
  };
  for (int j = 0; j < ny; ++j) {
    impedance_fix(0, j);
    impedance_fix(nx - 1, j);
  }
  for (int i = 1; i < nx - 1; ++i) {
    impedance_fix(i, 0);
    impedance_fix(i, ny - 1);
  }

  // implicit midpoint temperature
  Array2D rhs = s.theta.values + 0.25 * eps * (a - s.p_prev.values);
  Array2D theta_bar = ws.solve_forward_heat(rhs);

  laplacian_into(theta_bar, h, lap);
  Array2D p_new = a + eps * ws.d_inv() * lap;
  Array2D theta_new = 2.0 * theta_bar - s.theta.values;

  if (!p_new.allFinite() || !theta_new.allFinite())
    throw SolverError("forward step produced non-finite values", s.step_index);

  s.p_prev.values.swap(s.p_curr.values);
  s.p_curr.values.swap(p_new);
  s.theta.values.swap(theta_new);
  ++s.step_index;
  s.t = s.step_index * dt;
}

namespace {

// Centered diagnostic functionals for time level k, evaluated once the level
// k+1 fields exist: the rate uses the central pressure rate and the
// Crank-Nicolson midpoint temperature, which makes the recorded energy slope
// and dissipation rate satisfy the discrete balance identity exactly; the
// conserved functionals use the same centered rate.
StepDiagnostics centered_diagnostics(const Grid2D& g, const MediumFields& m,
                                     double dt, double t,
                                     const Array2D& p_before,
                                     const Array2D& p_at, const Array2D& p_after,
                                     const Array2D& theta_at,
                                     const Array2D& theta_after, double energy_at) {
  StepDiagnostics d;
  d.t = t;
  d.energy = energy_at;

  const Array2D vhat = (p_after - p_before) / (2.0 * dt);
  const Array2D theta_bar = 0.5 * (theta_at + theta_after);

  Array2D lap;
  laplacian_into(theta_bar, g.h, lap);
  double rate = -weighted_sum(m.alpha.values * lap.square(), g);
  double q_ac = weighted_sum(vhat / m.c.values.square(), g);
  auto bnd = [&](int i, int j) {
    const double gv = m.gamma.values(i, j);
    if (gv == 0.0) return;
    const double w = arc_weight(g, i, j);
    rate -= w * gv * vhat(i, j) * vhat(i, j);
    q_ac += w * gv * p_at(i, j);
  };
  for (int j = 0; j < g.ny; ++j) {
    bnd(0, j);
    bnd(g.nx - 1, j);
  }
  for (int i = 1; i < g.nx - 1; ++i) {
    bnd(i, 0);
    bnd(i, g.ny - 1);
  }
  d.diss_rate = rate;
  d.q_acoustic = q_ac;

  const Array2D dev = theta_at - m.epsilon * p_at;
  d.q_thermal = weighted_sum(dev, g);
  d.q_thermal_weighted = weighted_sum(dev / m.alpha.values, g);
  return d;
}

}  // namespace

ForwardResult forward_solve(const Field& p0, const MediumFields& m,
                            const SolverConfig& cfg, ThermoWorkspace* ws,
                            bool with_diagnostics) {
  std::unique_ptr<ThermoWorkspace> local;
  if (ws == nullptr) {
    local = std::make_unique<ThermoWorkspace>(m, cfg);
    ws = local.get();
  }

  ForwardResult out;
  out.trace.dt = cfg.dt;
  out.trace.grid = p0.grid;
  out.trace.nodes = m.obs.nodes;
  out.trace.values.resize(cfg.n_steps + 1, Eigen::Index(m.obs.nodes.size()));

  ThermoacousticState s = init_state(p0, m, cfg);
  const Grid2D& g = p0.grid;
  auto record_trace = [&](int row) {
    for (std::size_t k = 0; k < m.obs.nodes.size(); ++k)
      out.trace.values(row, Eigen::Index(k)) =
          s.p_curr.values(m.obs.nodes[k].i, m.obs.nodes[k].j);
    if (cfg.record_full) out.snapshots.push_back(s.p_curr);
  };

  record_trace(0);
  if (!with_diagnostics) {
    for (int k = 0; k < cfg.n_steps; ++k) {
      step(s, m, cfg, *ws);
      record_trace(k + 1);
    }
    out.final_state = std::move(s);
    return out;
  }

  out.diagnostics.resize(cfg.n_steps + 1);
  std::vector<double> energies(cfg.n_steps + 1);
  energies[0] = energy(s, m);

  // Diagnostics for level k are emitted after step k+1 (they need the
  // centered rate); the last level gets its rate from a throwaway step.
  Array2D p_before = s.p_prev.values;  // level k-1 relative to the next emit
  Array2D theta_at = s.theta.values;
  for (int k = 0; k < cfg.n_steps; ++k) {
    step(s, m, cfg, *ws);
    record_trace(k + 1);
    energies[k + 1] = energy(s, m);
    out.diagnostics[k] =
        centered_diagnostics(g, m, cfg.dt, k * cfg.dt, p_before,
                             s.p_prev.values, s.p_curr.values, theta_at,
                             s.theta.values, energies[k]);
    p_before = s.p_prev.values;
    theta_at = s.theta.values;
  }
  {
    ThermoacousticState tail = s;
    step(tail, m, cfg, *ws);
    out.diagnostics[cfg.n_steps] = centered_diagnostics(
        g, m, cfg.dt, cfg.tau, p_before, s.p_curr.values, tail.p_curr.values,
        s.theta.values, tail.theta.values, energies[cfg.n_steps]);
  }
  out.final_state = std::move(s);
  return out;
}

// --- diagnostics ---------------------------------------------------------------

double energy(const ThermoacousticState& s, const MediumFields& m) {
  const Grid2D& g = s.p_curr.grid;
  const double dt = s.dt;
  Array2D lap;

  const Array2D vel = (s.p_curr.values - s.p_prev.values) / dt;
  const double kinetic = weighted_sum(vel.square() / m.c.values.square(), g);

  // Pressure-gradient term in the leapfrog-compatible cross form
  // <-lap(p_curr), p_prev>; this is the discrete quantity the scheme
  // dissipates exactly.
  laplacian_into(s.p_curr.values, g.h, lap);
  const double grad_p = weighted_sum(-lap * s.p_prev.values, g);

  laplacian_into(s.theta.values, g.h, lap);
  const double grad_theta = weighted_sum(-lap * s.theta.values, g);

  const double e = 0.5 * (kinetic + grad_p + grad_theta);
  const double scale = 0.5 * (kinetic + std::abs(grad_p) + grad_theta);
  return (e < 0.0 && -e <= 1e-12 * scale) ? 0.0 : e;
}

double dissipation_rate(const ThermoacousticState& s, const MediumFields& m) {
  const Grid2D& g = s.p_curr.grid;
  Array2D lap;
  laplacian_into(s.theta.values, g.h, lap);
  double rate = -weighted_sum(m.alpha.values * lap.square(), g);

  const double idt = 1.0 / s.dt;
  auto bnd = [&](int i, int j) {
    const double gv = m.gamma.values(i, j);
    if (gv == 0.0) return;
    const double v = (s.p_curr.values(i, j) - s.p_prev.values(i, j)) * idt;
    rate -= arc_weight(g, i, j) * gv * v * v;
  };
  for (int j = 0; j < g.ny; ++j) {
    bnd(0, j);
    bnd(g.nx - 1, j);
  }
  for (int i = 1; i < g.nx - 1; ++i) {
    bnd(i, 0);
    bnd(i, g.ny - 1);
  }
  return rate;
}

ConservedQuantities conserved_quantities(const ThermoacousticState& s,
                                         const MediumFields& m) {
  const Grid2D& g = s.p_curr.grid;
  ConservedQuantities q;

  const Array2D vel = (s.p_curr.values - s.p_prev.values) / s.dt;
  q.q_acoustic = weighted_sum(vel / m.c.values.square(), g);
  auto bnd = [&](int i, int j) {
    const double gv = m.gamma.values(i, j);
    if (gv == 0.0) return;
    q.q_acoustic += arc_weight(g, i, j) * gv * s.p_curr.values(i, j);
  };
  for (int j = 0; j < g.ny; ++j) {
    bnd(0, j);
    bnd(g.nx - 1, j);
  }
  for (int i = 1; i < g.nx - 1; ++i) {
    bnd(i, 0);
    bnd(i, g.ny - 1);
  }

  const Array2D dev = s.theta.values - m.epsilon * s.p_curr.values;
  q.q_thermal = weighted_sum(dev, g);
  q.q_thermal_weighted = weighted_sum(dev / m.alpha.values, g);
  return q;
}

}  // namespace tpat
