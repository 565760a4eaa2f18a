#pragma once

#include "tpat/adjoint.hpp"
#include "tpat/forward.hpp"

#include <functional>
#include <optional>

namespace tpat {

enum class CgMode { H0, H1 };

struct CgOptions {
  CgMode mode = CgMode::H1;
  double tol = 1e-6;  // relative residual stopping threshold
  int k_max = 50;
  int coarse_factor = 2;  // power of two
  bool record_history = true;
};

/// Thrown when the conjugate gradient loop detects an indefinite operator or
/// a residual increase.
struct CgError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IterationRecord {
  int iter = 0;
  double residual_norm = 0.0;
  double err_h0_pct = std::numeric_limits<double>::quiet_NaN();
  double err_h1_pct = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

struct ReconReport {
  Field estimate;
  std::vector<double> residual_norms;
  std::vector<IterationRecord> iterations;
  double seconds_time_reversal = 0.0;
  double seconds_rhs = 0.0;
  double seconds_cg = 0.0;
};

/// Percent relative error 100 * |est - truth| / |truth| in the H0 or H1 norm.
double relative_error_pct(const Field& est, const Field& truth, CgMode norm);

/// Measurement of an initial profile under rapid heat deposition.
MeasurementTrace apply_M(const Field& p0, const MediumFields& m,
                         const SolverConfig& cfg, ThermoWorkspace* ws = nullptr);

/// Smoothed H1 representative of an H0 functional: restrict to the coarse
/// grid, solve the homogeneous-Dirichlet Poisson problem there, interpolate
/// back. The coarse solve filters the unresolved high-frequency content.
class TwoGridLift {
 public:
  TwoGridLift(const Grid2D& fine, int coarse_factor = 2, double tol = 1e-10);
  Field apply(const Field& f) const;
  const Grid2D& coarse_grid() const { return solver_.grid(); }

 private:
  Grid2D fine_;
  int levels_ = 1;
  PoissonDirichlet solver_;
};

/// Convenience wrapper building the lift for one application.
Field riesz_lift_h1(const Field& f, int coarse_factor = 2, double tol = 1e-10);

/// Data-space Riesz inverse: represents trace data as the boundary functional
/// (I - d^2/dt^2 - d^2/ds^2) d, with mirror closures in time and along open
/// boundary chains (periodic along the full boundary). This carries the
/// H1 geometry of the measurement cylinder into the back-propagation.
BoundaryControl h1_data_functional(const MeasurementTrace& tr);

/// Back-propagation of the trace at t = 0. H0: the raw adjoint output of the
/// trace values. H1: the adjoint output of the data functional, passed
/// through the two-grid lift.
Field apply_M_star(const MeasurementTrace& tr, const MediumFields& m,
                   const SolverConfig& cfg, CgMode mode,
                   const TwoGridLift* lift = nullptr,
                   ThermoWorkspace* ws = nullptr);

/// Purely acoustic time reversal: integrates the wave part backward from zero
/// terminal data, imposing the recorded trace as Dirichlet values on the
/// observed nodes; the rest of the boundary keeps its impedance condition.
Field time_reversal(const MeasurementTrace& tr, const MediumFields& m,
                    const SolverConfig& cfg);

/// Conjugate gradient for N phi = zeta in the inner product selected by
/// opt.mode. The residual is recomputed from the definition each iteration.
/// The loop stops at the tolerance, the iteration cap, or the residual floor
/// (an increase of the recomputed residual, which marks the discretization
/// noise level of the operator pair); recorded residual norms are strictly
/// decreasing. An indefinite pairing or a 10x residual blow-up raises CgError.
/// `truth`, when given, adds per-iteration relative errors to the report;
/// `on_iterate` is called with every iterate including the initial guess.
ReconReport cg_solve(const std::function<Field(const Field&)>& apply_N,
                     const Field& zeta, const Field& phi0, const CgOptions& opt,
                     const Field* truth = nullptr,
                     const std::function<void(int, const Field&)>& on_iterate = {});

/// Full pipeline: time reversal as initial guess, zeta = M* applied to the
/// trace, then conjugate gradient on the normal operator M* M.
ReconReport reconstruct(const MeasurementTrace& tr, const MediumFields& m,
                        const SolverConfig& cfg, const CgOptions& opt,
                        const Field* truth = nullptr);

}  // namespace tpat
