#include "tpat/inversion.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <sstream>

namespace tpat {

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

double relative_error_pct(const Field& est, const Field& truth, CgMode norm) {
  require_same_grid(est, truth, "relative_error");
  const Field diff(est.grid, est.values - truth.values);
  const double num = (norm == CgMode::H0) ? norm_h0(diff) : norm_h1(diff);
  const double den = (norm == CgMode::H0) ? norm_h0(truth) : norm_h1(truth);
  if (!(den > 0.0))
    throw std::invalid_argument("relative_error: reference field has zero norm");
  return 100.0 * num / den;
}

MeasurementTrace apply_M(const Field& p0, const MediumFields& m,
                         const SolverConfig& cfg, ThermoWorkspace* ws) {
  return forward_solve(p0, m, cfg, ws, false).trace;
}

TwoGridLift::TwoGridLift(const Grid2D& fine, int coarse_factor, double tol)
    : fine_(fine),
      levels_([&] {
        if (coarse_factor < 2 || (coarse_factor & (coarse_factor - 1)) != 0)
          throw std::invalid_argument(
              "TwoGridLift: coarse_factor must be a power of two >= 2");
        int lv = 0;
        for (int f = coarse_factor; f > 1; f /= 2) ++lv;
        return lv;
      }()),
      solver_([&] {
        Grid2D g = fine;
        for (int l = 0; l < levels_; ++l) g = coarsen(g);
        return PoissonDirichlet(g, tol);
      }()) {}

Field TwoGridLift::apply(const Field& f) const {
  if (!(f.grid == fine_))
    throw std::invalid_argument("TwoGridLift::apply: grid mismatch");
  Field r = f;
  for (int l = 0; l < levels_; ++l) r = restrict_full_weighting(r);
  r = solver_.solve(r);
  for (int l = 0; l < levels_; ++l) r = prolong_bilinear(r);
  return r;
}

Field riesz_lift_h1(const Field& f, int coarse_factor, double tol) {
  return TwoGridLift(f.grid, coarse_factor, tol).apply(f);
}

BoundaryControl h1_data_functional(const MeasurementTrace& tr) {
  BoundaryControl eta = BoundaryControl::from_trace(tr);
  const Eigen::MatrixXd& d = tr.values;
  const Eigen::Index rows = d.rows(), cols = d.cols();

  // second difference in time, mirror ends
  Eigen::MatrixXd dtt(rows, cols);
  const double idt2 = 1.0 / (tr.dt * tr.dt);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::Index rp = (r + 1 < rows) ? r + 1 : rows - 2;
    const Eigen::Index rm = (r > 0) ? r - 1 : 1;
    dtt.row(r) = (d.row(rp) - 2.0 * d.row(r) + d.row(rm)) * idt2;
  }

  // second difference in arc length along the boundary chains
  Array2D mask = Array2D::Zero(tr.grid.nx, tr.grid.ny);
  for (const auto& n : tr.nodes) mask(n.i, n.j) = 1.0;
  const BoundarySet bs = BoundarySet::from_mask(tr.grid, mask);
  if (bs.nodes.size() != tr.nodes.size())
    throw std::invalid_argument("h1_data_functional: inconsistent node set");
  for (std::size_t k = 0; k < bs.nodes.size(); ++k)
    if (bs.nodes[k].i != tr.nodes[k].i || bs.nodes[k].j != tr.nodes[k].j)
      throw std::invalid_argument(
          "h1_data_functional: trace nodes are not in scan order");

  Eigen::MatrixXd dss = Eigen::MatrixXd::Zero(rows, cols);
  const double ih2 = 1.0 / (tr.grid.h * tr.grid.h);
  for (const auto& chain : bs.chains()) {
    const auto& idx = chain.idx;
    const int n = int(idx.size());
    if (n < 3) continue;  // too short for a second difference; leave as zero
    for (int q = 0; q < n; ++q) {
      int qp = q + 1, qm = q - 1;
      if (chain.closed) {
        qp = (q + 1) % n;
        qm = (q + n - 1) % n;
      } else {
        if (qp >= n) qp = n - 2;
        if (qm < 0) qm = 1;
      }
      dss.col(idx[q]) =
          (d.col(idx[qp]) - 2.0 * d.col(idx[q]) + d.col(idx[qm])) * ih2;
    }
  }

  eta.values = d - dtt - dss;
  return eta;
}

Field apply_M_star(const MeasurementTrace& tr, const MediumFields& m,
                   const SolverConfig& cfg, CgMode mode,
                   const TwoGridLift* lift, ThermoWorkspace* ws) {
  if (mode == CgMode::H0)
    return adjoint_solve(BoundaryControl::from_trace(tr), m, cfg, ws);
  const Field raw = adjoint_solve(h1_data_functional(tr), m, cfg, ws);
  if (lift != nullptr) return lift->apply(raw);
  return riesz_lift_h1(raw);
}

Field time_reversal(const MeasurementTrace& tr, const MediumFields& m,
                    const SolverConfig& cfg) {
  const Grid2D& g = m.c.grid;
  if (!(tr.grid == g))
    throw std::invalid_argument("time_reversal: trace grid mismatch");
  if (tr.n_steps() != cfg.n_steps)
    throw std::invalid_argument("time_reversal: trace/time-grid mismatch");
  if (!tr.values.allFinite())
    throw std::invalid_argument("time_reversal: non-finite trace values");

  const double dt = cfg.dt, h = g.h;
  const int nx = g.nx, ny = g.ny;
  const Array2D& cv = m.c.values;

  // Dirichlet imposition of the recorded values on the observed nodes.
  std::vector<std::uint8_t> observed(std::size_t(nx) * ny, 0);
  for (const auto& n : tr.nodes) observed[std::size_t(n.j) * nx + n.i] = 1;
  auto impose = [&](Array2D& q, int row) {
    for (std::size_t k = 0; k < tr.nodes.size(); ++k)
      q(tr.nodes[k].i, tr.nodes[k].j) = tr.values(row, Eigen::Index(k));
  };

  Array2D q_curr = Array2D::Zero(nx, ny);
  impose(q_curr, cfg.n_steps);

  // Fictitious pre-terminal level (zero terminal velocity).
  Array2D lap(nx, ny);
  laplacian_into(q_curr, h, lap);
  Array2D q_prev = q_curr + 0.5 * dt * dt * cv.square() * lap;

  for (int k = 0; k < cfg.n_steps; ++k) {
    laplacian_into(q_curr, h, lap);
    Array2D q_new = 2.0 * q_curr - q_prev + (dt * dt) * cv.square() * lap;

    // Unobserved boundary nodes keep the impedance closure, damping in the
    // marching direction.
    auto impedance_fix = [&](int i, int j) {
      if (observed[std::size_t(j) * nx + i]) return;
      const double gv = m.gamma.values(i, j);
      if (gv == 0.0) return;
      const double b = dt * cv(i, j) * cv(i, j) * g.exposed_sides(i, j) * gv / h;
      q_new(i, j) = (q_new(i, j) + b * q_prev(i, j)) / (1.0 + b);
    };
    for (int j = 0; j < ny; ++j) {
      impedance_fix(0, j);
      impedance_fix(nx - 1, j);
    }
    for (int i = 1; i < nx - 1; ++i) {
      impedance_fix(i, 0);
      impedance_fix(i, ny - 1);
    }

    impose(q_new, cfg.n_steps - k - 1);
    if (!q_new.allFinite())
      throw SolverError("time reversal produced non-finite values", k);
    q_prev.swap(q_curr);
    q_curr.swap(q_new);
  }
  return Field(g, std::move(q_curr));
}

ReconReport cg_solve(const std::function<Field(const Field&)>& apply_N,
                     const Field& zeta, const Field& phi0, const CgOptions& opt,
                     const Field* truth,
                     const std::function<void(int, const Field&)>& on_iterate) {
  if (!(opt.tol > 0.0)) throw std::invalid_argument("cg_solve: tol must be > 0");
  if (opt.k_max < 1) throw std::invalid_argument("cg_solve: k_max must be >= 1");
  require_same_grid(zeta, phi0, "cg_solve");

  const auto ip = [&](const Field& a, const Field& b) {
    return opt.mode == CgMode::H0 ? inner_h0(a, b) : inner_h1(a, b);
  };

  ReconReport rep;
  const auto t_cg = std::chrono::steady_clock::now();

  Field phi = phi0;
  auto record = [&](int iter, double rn, double secs) {
    IterationRecord rec;
    rec.iter = iter;
    rec.residual_norm = rn;
    if (truth != nullptr) {
      rec.err_h0_pct = relative_error_pct(phi, *truth, CgMode::H0);
      rec.err_h1_pct = relative_error_pct(phi, *truth, CgMode::H1);
    }
    rec.seconds = secs;
    rep.residual_norms.push_back(rn);
    if (opt.record_history || iter == 0) rep.iterations.push_back(rec);
    if (on_iterate) on_iterate(iter, phi);
  };

  Field r(zeta.grid, zeta.values - apply_N(phi).values);
  double rn2 = ip(r, r);
  double rn = std::sqrt(std::max(0.0, rn2));
  const double rn0 = rn;
  record(0, rn, seconds_since(t_cg));

  Field s = r;
  for (int k = 0; k < opt.k_max; ++k) {
    if (rn <= opt.tol * rn0 || rn == 0.0) break;
    const auto t_it = std::chrono::steady_clock::now();

    const Field Ns = apply_N(s);
    const double den = ip(s, Ns);
    if (!(den > 0.0)) {
      std::ostringstream os;
      os << "cg_solve: operator not positive definite at iteration " << k
         << " (<s, N s> = " << den << ")";
      throw CgError(os.str());
    }
    const double a = rn2 / den;
    const Field phi_prev = phi;
    phi.values += a * s.values;

    // Residual recomputed from the definition rather than updated.
    r.values = zeta.values - apply_N(phi).values;
    const double rn2_new = ip(r, r);
    const double rn_new = std::sqrt(std::max(0.0, rn2_new));
    if (rn_new > 10.0 * rn0)
      throw CgError("cg_solve: residual grew by more than 10x");
    if (rn_new > rn) {
      // Convergence floor of the recomputed residual (the discrete operator
      // is symmetric only up to discretization error). Keep the last iterate
      // whose residual decreased; the recorded norms stay nonincreasing.
      phi = phi_prev;
      break;
    }

    const double beta = rn2_new / rn2;
    s.values = r.values + beta * s.values;
    rn2 = rn2_new;
    rn = rn_new;
    record(k + 1, rn, seconds_since(t_it));
  }

  rep.estimate = std::move(phi);
  rep.seconds_cg = seconds_since(t_cg);
  return rep;
}

ReconReport reconstruct(const MeasurementTrace& tr, const MediumFields& m,
                        const SolverConfig& cfg, const CgOptions& opt,
                        const Field* truth) {
  ThermoWorkspace ws(m, cfg);
  std::unique_ptr<TwoGridLift> lift;
  if (opt.mode == CgMode::H1)
    lift = std::make_unique<TwoGridLift>(m.c.grid, opt.coarse_factor);

  auto t0 = std::chrono::steady_clock::now();
  const Field phi0 = time_reversal(tr, m, cfg);
  const double tr_seconds = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const Field zeta = apply_M_star(tr, m, cfg, opt.mode, lift.get(), &ws);
  const double rhs_seconds = seconds_since(t0);

  const auto apply_N = [&](const Field& phi) {
    return apply_M_star(apply_M(phi, m, cfg, &ws), m, cfg, opt.mode, lift.get(),
                        &ws);
  };

  ReconReport rep = cg_solve(apply_N, zeta, phi0, opt, truth);
  rep.seconds_time_reversal = tr_seconds;
  rep.seconds_rhs = rhs_seconds;
  return rep;
}

}  // namespace tpat
