#pragma once

#include "tpat/forward.hpp"

#include <functional>

namespace tpat {

/// Boundary control on the observed portion over the time grid. Row k holds
/// the values at t = k dt; the control is implicitly zero on the unobserved
/// part of the boundary.
struct BoundaryControl {
  Eigen::MatrixXd values;  // (n_steps+1) x nodes.size()
  double dt = 0.0;
  Grid2D grid;
  std::vector<BoundarySet::Node> nodes;

  int n_steps() const { return int(values.rows()) - 1; }

  static BoundaryControl zero(const MediumFields& m, const SolverConfig& cfg,
                              const Grid2D& grid);
  static BoundaryControl from_trace(const MeasurementTrace& tr);
};

/// Dual fields marched backward from vanishing data at t = tau.
struct AdjointState {
  Field psi_curr;  // psi at t = tau - k dt
  Field psi_prev;  // psi one backward step earlier (t = tau - (k-1) dt)
  Field xi;
  double t = 0.0;
  int step_index = 0;  // backward step count k
  double dt = 0.0;
};

/// Solves the dual system backward from t = tau with the control eta entering
/// through the boundary closure d_nu psi - gamma dt_psi = eta, and returns
/// -d/dt psi at t = 0 (two-level difference). The temperature-like variable
/// xi obeys d_nu(xi - eps psi) = 0 and is advanced by Crank-Nicolson in the
/// stable (backward) direction.
Field adjoint_solve(const BoundaryControl& eta, const MediumFields& m,
                    const SolverConfig& cfg, ThermoWorkspace* ws = nullptr,
                    const std::function<void(const AdjointState&)>& observer = {});

/// Trapezoid-in-time, arc-weighted-in-space pairing of two boundary series.
double spacetime_inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       double dt, const std::vector<BoundarySet::Node>& nodes);

/// Relative defect of the duality identity <p0, S eta> = <M p0, eta>:
/// runs one forward and one adjoint solve and compares the two pairings.
/// Returns 0 when both pairings vanish.
double duality_gap(const Field& p0, const BoundaryControl& eta,
                   const MediumFields& m, const SolverConfig& cfg);

}  // namespace tpat
