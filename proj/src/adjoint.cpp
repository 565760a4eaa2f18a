#include "tpat/adjoint.hpp"

#include <cmath>
#include <memory>

namespace tpat {

BoundaryControl BoundaryControl::zero(const MediumFields& m,
                                      const SolverConfig& cfg,
                                      const Grid2D& grid) {
  BoundaryControl c;
  c.values = Eigen::MatrixXd::Zero(cfg.n_steps + 1,
                                   Eigen::Index(m.obs.nodes.size()));
  c.dt = cfg.dt;
  c.grid = grid;
  c.nodes = m.obs.nodes;
  return c;
}

BoundaryControl BoundaryControl::from_trace(const MeasurementTrace& tr) {
  BoundaryControl c;
  c.values = tr.values;
  c.dt = tr.dt;
  c.grid = tr.grid;
  c.nodes = tr.nodes;
  return c;
}

Field adjoint_solve(const BoundaryControl& eta, const MediumFields& m,
                    const SolverConfig& cfg, ThermoWorkspace* ws,
                    const std::function<void(const AdjointState&)>& observer) {
  const Grid2D& g = m.c.grid;
  if (!(eta.grid == g))
    throw std::invalid_argument("adjoint_solve: control grid mismatch");
  if (eta.n_steps() != cfg.n_steps ||
      eta.nodes.size() != m.obs.nodes.size())
    throw std::invalid_argument(
        "adjoint_solve: control does not match the solver time grid");
  if (!eta.values.allFinite())
    throw std::invalid_argument("adjoint_solve: non-finite control values");

  std::unique_ptr<ThermoWorkspace> local;
  if (ws == nullptr) {
    local = std::make_unique<ThermoWorkspace>(m, cfg);
    ws = local.get();
  }

  const double dt = cfg.dt, h = g.h;
  const int nx = g.nx, ny = g.ny;
  const double eps = m.epsilon;
  const Array2D& cv = m.c.values;

  AdjointState s;
  s.dt = dt;
  s.psi_curr = Field(g);
  s.xi = Field(g);

  // Fictitious level one backward step before tau. Terminal data vanish, so
  // only the eta forcing at t = tau contributes:
  // psi(tau + dt) = (dt^2/2) c^2 * (2/h) * eta per exposed side.
  s.psi_prev = Field(g);
  for (std::size_t k = 0; k < eta.nodes.size(); ++k) {
    const auto& n = eta.nodes[k];
    const double f = eta.values(cfg.n_steps, Eigen::Index(k));
    s.psi_prev.values(n.i, n.j) += 0.5 * dt * dt * cv(n.i, n.j) * cv(n.i, n.j) *
                                   (2.0 / h) * g.exposed_sides(n.i, n.j) * f;
  }
  s.t = cfg.tau;

  // Backward march. The heat equation turns the coupling
  // eps c^2 alpha^-1 dt_xi into -eps c^2 lap(w), w = xi - eps psi, with a
  // mirror closure on the combination; w is taken at the Crank-Nicolson
  // midpoint, mirroring the forward scheme, and eliminating psi_new leaves
  // one prefactored solve per step.
  Array2D lap(nx, ny);
  for (int k = 0; k < cfg.n_steps; ++k) {
    // gamma- and eta-adjusted leapfrog predictor
    laplacian_into(s.psi_curr.values, h, lap);
    Array2D a = 2.0 * s.psi_curr.values - s.psi_prev.values +
                (dt * dt) * cv.square() * lap;

    // eta enters the psi ghost closure: d_nu psi = gamma dt_psi + eta.
    const int eta_row = cfg.n_steps - k;
    for (std::size_t q = 0; q < eta.nodes.size(); ++q) {
      const auto& n = eta.nodes[q];
      a(n.i, n.j) += (dt * dt) * cv(n.i, n.j) * cv(n.i, n.j) * (2.0 / h) *
                     g.exposed_sides(n.i, n.j) *
                     eta.values(eta_row, Eigen::Index(q));
    }

    // The gamma part of the closure damps in the marching direction.
    auto impedance_fix = [&](int i, int j) {
      const double gv = m.gamma.values(i, j);
      if (gv == 0.0) return;
      const double b = dt * cv(i, j) * cv(i, j) * g.exposed_sides(i, j) * gv / h;
      a(i, j) = (a(i, j) + b * s.psi_prev.values(i, j)) / (1.0 + b);
    };
    for (int j = 0; j < ny; ++j) {
      impedance_fix(0, j);
      impedance_fix(nx - 1, j);
    }
    for (int i = 1; i < nx - 1; ++i) {
      impedance_fix(i, 0);
      impedance_fix(i, ny - 1);
    }

    // midpoint of w = xi - eps psi
    Array2D rhs = s.xi.values - 0.5 * eps * (a + s.psi_curr.values);
    Array2D w_bar = ws->solve_adjoint_heat(rhs);

    laplacian_into(w_bar, h, lap);
    Array2D psi_new = a - eps * ws->d_inv() * lap;
    Array2D xi_new = s.xi.values + dt * m.alpha.values * lap;

    if (!psi_new.allFinite() || !xi_new.allFinite())
      throw SolverError("adjoint step produced non-finite values", k);

    s.psi_prev.values.swap(s.psi_curr.values);
    s.psi_curr.values.swap(psi_new);
    s.xi.values.swap(xi_new);
    ++s.step_index;
    s.t = cfg.tau - s.step_index * dt;
    if (observer) observer(s);
  }

  // -d/dt psi at t = 0 with the same two-level difference the forward solver
  // uses for the pressure rate.
  return Field(g, (s.psi_curr.values - s.psi_prev.values) / dt);
}

double spacetime_inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       double dt, const std::vector<BoundarySet::Node>& nodes) {
  if (a.rows() != b.rows() || a.cols() != b.cols() ||
      a.cols() != Eigen::Index(nodes.size()))
    throw std::invalid_argument("spacetime_inner: shape mismatch");
  double s = 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double wt = (r == 0 || r == a.rows() - 1) ? 0.5 * dt : dt;
    double row = 0.0;
    for (Eigen::Index q = 0; q < a.cols(); ++q)
      row += nodes[std::size_t(q)].w * a(r, q) * b(r, q);
    s += wt * row;
  }
  return s;
}

double duality_gap(const Field& p0, const BoundaryControl& eta,
                   const MediumFields& m, const SolverConfig& cfg) {
  ThermoWorkspace ws(m, cfg);
  const ForwardResult fwd = forward_solve(p0, m, cfg, &ws, false);
  const Field s_eta = adjoint_solve(eta, m, cfg, &ws);

  const double lhs = inner_h0(p0, s_eta);
  const double rhs =
      spacetime_inner(fwd.trace.values, eta.values, cfg.dt, eta.nodes);
  const double den = std::max(std::abs(lhs), std::abs(rhs));
  if (den == 0.0) return 0.0;
  return std::abs(lhs - rhs) / den;
}

}  // namespace tpat
