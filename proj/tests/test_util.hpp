#pragma once

#include "tpat/adjoint.hpp"
#include "tpat/forward.hpp"
#include "tpat/medium.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace tpat::test {

inline constexpr double kPi = std::numbers::pi;

/// Constant-speed reference medium: c = 1, gamma = 1/c on the boundary,
/// full-boundary observation.
inline MediumFields reference_medium(const Grid2D& g, double epsilon = 0.1,
                                     double alpha = 0.01) {
  MediumFields m;
  m.c = Field(g, Array2D::Constant(g.nx, g.ny, 1.0));
  m.alpha = Field(g, Array2D::Constant(g.nx, g.ny, alpha));
  m.gamma = gamma_from_speed(m.c);
  m.obs = BoundarySet::full_boundary(g);
  m.epsilon = epsilon;
  return m;
}

/// Reflecting lossless medium: gamma = 0 everywhere, epsilon = 0.
inline MediumFields lossless_medium(const Grid2D& g, double alpha = 0.01) {
  MediumFields m = reference_medium(g, 0.0, alpha);
  m.gamma = Field(g);
  return m;
}

/// Random combination of cos(kx pi x) cos(ky pi y) modes up to kmax;
/// compatible with the mirror boundary closure.
inline Field bandlimited_field(const Grid2D& g, int kmax, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  Array2D v = Array2D::Zero(g.nx, g.ny);
  for (int kx = 0; kx <= kmax; ++kx)
    for (int ky = 0; ky <= kmax; ++ky) {
      const double a = coef(rng);
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
          v(i, j) +=
              a * std::cos(kx * kPi * g.x(i)) * std::cos(ky * kPi * g.y(j));
    }
  return Field(g, std::move(v));
}

/// Random combination of sin(kx pi x) sin(ky pi y) modes, vanishing on the
/// boundary like compactly supported profiles do.
inline Field interior_bandlimited_field(const Grid2D& g, int kmax,
                                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  Array2D v = Array2D::Zero(g.nx, g.ny);
  for (int kx = 1; kx <= kmax; ++kx)
    for (int ky = 1; ky <= kmax; ++ky) {
      const double a = coef(rng);
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
          v(i, j) +=
              a * std::sin(kx * kPi * g.x(i)) * std::sin(ky * kPi * g.y(j));
    }
  return Field(g, std::move(v));
}

/// Uniform random node values in [-1, 1].
inline Field random_field(const Grid2D& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Array2D v(g.nx, g.ny);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) v(i, j) = u(rng);
  return Field(g, std::move(v));
}

/// Smooth-in-time, smooth-along-the-boundary control.
inline BoundaryControl bandlimited_control(const MediumFields& m,
                                           const SolverConfig& cfg,
                                           const Grid2D& g,
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

}  // namespace tpat::test
