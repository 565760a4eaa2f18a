#pragma once

#include "tpat/grid.hpp"
#include "tpat/medium.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace tpat {

/// Thrown when a time-stepping loop produces non-finite values or an inner
/// solve fails; carries the step index where the failure occurred.
struct SolverError : std::runtime_error {
  SolverError(const std::string& msg, int step)
      : std::runtime_error(msg + " (step " + std::to_string(step) + ")"),
        step_index(step) {}
  int step_index = 0;
};

/// Time-stepping parameters. dt divides tau exactly: n_steps is rounded up
/// from the CFL bound and dt = tau / n_steps.
struct SolverConfig {
  double tau = 2.0;
  double cfl = 0.5;
  double dt = 0.0;
  int n_steps = 0;
  bool record_full = false;

  static SolverConfig create(double tau, double cfl, const Grid2D& grid,
                             const Field& c);
};

/// Two pressure time levels plus the temperature deviation.
struct ThermoacousticState {
  Field p_curr;
  Field p_prev;
  Field theta;
  double t = 0.0;
  int step_index = 0;
  double dt = 0.0;
};

/// Pressure samples on the observed boundary over the time grid.
/// Row k holds the values at t = k dt, in the order of `nodes`.
struct MeasurementTrace {
  Eigen::MatrixXd values;  // (n_steps+1) x nodes.size()
  double dt = 0.0;
  Grid2D grid;
  std::vector<BoundarySet::Node> nodes;

  int n_steps() const { return int(values.rows()) - 1; }
};

/// Per-level energy and conservation functionals recorded by forward_solve.
/// The dissipation rate and the acoustic functional use the central pressure
/// rate (p at levels k+1 and k-1) and the Crank-Nicolson midpoint
/// temperature, so the recorded energy differences satisfy
/// energy[k+1] - energy[k] = dt * diss_rate[k] up to rounding.
struct StepDiagnostics {
  double t = 0.0;
  double energy = 0.0;
  double diss_rate = 0.0;
  double q_acoustic = 0.0;
  double q_thermal = 0.0;
  double q_thermal_weighted = 0.0;
};

struct ForwardResult {
  MeasurementTrace trace;
  ThermoacousticState final_state;
  std::vector<StepDiagnostics> diagnostics;
  std::vector<Field> snapshots;  // populated when cfg.record_full is set
};

/// Prefactored implicit solves shared by the forward and adjoint marches for
/// a fixed medium and time step. Both reduce to one constant sparse solve
/// (I + diag(k) A) x = rhs per step, with A the negative mirror-closed
/// Laplacian and k collecting the Crank-Nicolson and coupling coefficients.
class ThermoWorkspace {
 public:
  ThermoWorkspace(const MediumFields& m, const SolverConfig& cfg);

  Array2D solve_forward_heat(const Array2D& rhs) const {
    return solve(forward_, rhs);
  }
  Array2D solve_adjoint_heat(const Array2D& rhs) const {
    return solve(adjoint_, rhs);
  }
  /// Inverse of the gamma-adjusted leapfrog diagonal, dt^2 c^2 / (1 + b).
  const Array2D& d_inv() const { return d_inv_; }
  const Grid2D& grid() const { return grid_; }
  double dt() const { return dt_; }

 private:
  struct HeatSolve {
    Array2D w_over_k;
    std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt;
  };
  void factor(const Array2D& k, HeatSolve& hs);
  Array2D solve(const HeatSolve& hs, const Array2D& rhs) const;

  Grid2D grid_;
  double dt_ = 0.0;
  Array2D d_inv_;
  HeatSolve forward_, adjoint_;
};

/// Initial state under rapid heat deposition: p1 = 0, theta0 = eps * p0.
/// p_prev is the Taylor-consistent fictitious level at t = -dt.
ThermoacousticState init_state(const Field& p0, const MediumFields& m,
                               const SolverConfig& cfg);

/// Advances one time step: leapfrog for the pressure with the impedance
/// closure folded into the boundary update, Crank-Nicolson for the
/// temperature with the centered pressure-rate source.
void step(ThermoacousticState& s, const MediumFields& m,
          const SolverConfig& cfg, ThermoWorkspace& ws);

/// Runs the full march, recording the boundary trace and (optionally)
/// per-step diagnostics.
ForwardResult forward_solve(const Field& p0, const MediumFields& m,
                            const SolverConfig& cfg,
                            ThermoWorkspace* ws = nullptr,
                            bool with_diagnostics = true);

/// Discrete energy 1/2 (|grad p|^2 + c^-2 |dp/dt|^2 + |grad theta|^2), with
/// dp/dt = (p_curr - p_prev)/dt and the pressure-gradient term evaluated in
/// the leapfrog-compatible cross form <grad p_curr, grad p_prev>.
double energy(const ThermoacousticState& s, const MediumFields& m);

/// Right-hand side of the energy balance: -int alpha |lap theta|^2
/// - bdry int gamma |dp/dt|^2, with the two-level pressure rate.
double dissipation_rate(const ThermoacousticState& s, const MediumFields& m);

struct ConservedQuantities {
  double q_acoustic = 0.0;          // int c^-2 dp/dt + bdry int gamma p
  double q_thermal = 0.0;           // int (theta - eps p)
  double q_thermal_weighted = 0.0;  // int (theta - eps p) / alpha
};

ConservedQuantities conserved_quantities(const ThermoacousticState& s,
                                         const MediumFields& m);

}  // namespace tpat
