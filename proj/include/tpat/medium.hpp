#pragma once

#include "tpat/grid.hpp"

#include <string>
#include <vector>

namespace tpat {

/// Physical inputs in SI units.
struct PhysicalParams {
  double K = 2.25e9;         // bulk modulus [Pa]
  double rho = 1000.0;       // density [kg/m^3]
  double theta_ref = 300.0;  // reference temperature [K]
  double beta = 250e-6;      // volumetric thermal expansion [1/K]
  double c_p = 4000.0;       // specific heat [J/(kg K)]
  double alpha_phys = 1.4e-7;  // thermal diffusivity [m^2/s]
  double L = 0.1;            // domain length scale [m]
  double c_phys = 1500.0;    // compressional speed [m/s]
};

/// Unitless parameters derived from PhysicalParams.
struct UnitlessParams {
  double c_hat = 1.0;
  double alpha_hat = 0.0;
  double sigma = 1.0;
  double epsilon = 0.0;
  double gruneisen = 0.0;
  double T = 0.0;  // time scale [s]
  std::vector<std::string> warnings;
};

/// Converts physical parameters to the unitless set used by the solvers.
/// Rejects nonpositive inputs naming the offending field; warns when sigma
/// deviates from 1 (the solver assumes sigma = 1) and when theta_ref falls
/// outside the typical soft-tissue range.
UnitlessParams nondimensionalize(const PhysicalParams& p);

/// Unitless wave speed for a spatially varying physical speed field:
/// c_hat = c_phys / c_ref with c_ref^2 = K / rho.
Field nondimensionalize_speed(const Field& c_phys, const PhysicalParams& p);

/// Unitless material fields plus observation geometry.
struct MediumFields {
  Field c;       // wave speed, > 0 everywhere
  Field alpha;   // thermal diffusivity, > 0 everywhere
  Field gamma;   // boundary impedance, >= 0; zero away from the boundary
  BoundarySet obs;  // observed boundary portion
  double epsilon = 0.0;

  /// Checks positivity and that every boundary node with gamma > 0 is observed.
  void validate() const;
};

/// Impedance gamma = 1/c sampled on the boundary nodes (zero inside).
Field gamma_from_speed(const Field& c);

/// Classic 10-ellipse head phantom mapped onto the grid rectangle
/// ([-1,1]^2 ellipse coordinates), scaled so the maximum equals `scale`.
Field shepp_logan(const Grid2D& g, double scale = 1.0);

/// Isotropic Gaussian bump exp(-r^2 / (2 sigma^2)) of given amplitude.
Field gaussian_blob(const Grid2D& g, double cx, double cy, double sigma,
                    double amplitude = 1.0);

/// Elliptical annulus region for the layered speed profile.
struct AnnulusSpec {
  double cx = 0.5;
  double cy = 0.2;
  double a_inner = 0.10;
  double b_inner = 0.06;
  double a_outer = 0.18;
  double b_outer = 0.12;
};

/// Piecewise speed: `layer_value` inside the annulus, `base` outside, then one
/// 9-point averaging pass so the profile is smooth enough for the stencils.
Field layered_speed(const Grid2D& g, double base, double layer_value,
                    const AnnulusSpec& region);

/// Result of removing the constant (zero-energy) mode from initial data.
struct ProjectedInitialData {
  Field p0;
  Field p1;
  Field theta0;
  double p_const = 0.0;
  double theta_const = 0.0;
};

/// Splits (p0, p1, theta0) into a zero-mean part plus spatially constant
/// offsets so both conserved functionals vanish at t = 0. Requires a boundary
/// with nonvanishing integrated impedance.
ProjectedInitialData project_energy_space(const Field& p0, const Field& p1,
                                          const Field& theta0,
                                          const MediumFields& m);

}  // namespace tpat
