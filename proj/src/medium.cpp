#include "tpat/medium.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace tpat {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    std::ostringstream os;
    os << "nondimensionalize: " << name << " must be positive and finite, got "
       << v;
    throw std::invalid_argument(os.str());
  }
}

struct Ellipse {
  double value;  // additive intensity
  double a, b;   // semi-axes
  double x0, y0;
  double phi_deg;
};

// Shepp & Logan's head phantom, original intensities.
constexpr Ellipse kSheppLogan[10] = {
    {2.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0},
    {-0.98, 0.6624, 0.8740, 0.00, -0.0184, 0.0},
    {-0.02, 0.1100, 0.3100, 0.22, 0.0000, -18.0},
    {-0.02, 0.1600, 0.4100, -0.22, 0.0000, 18.0},
    {0.01, 0.2100, 0.2500, 0.00, 0.3500, 0.0},
    {0.01, 0.0460, 0.0460, 0.00, 0.1000, 0.0},
    {0.01, 0.0460, 0.0460, 0.00, -0.1000, 0.0},
    {0.01, 0.0460, 0.0230, -0.08, -0.6050, 0.0},
    {0.01, 0.0230, 0.0230, 0.00, -0.6050, 0.0},
    {0.01, 0.0230, 0.0460, 0.06, -0.6050, 0.0},
};

bool inside(const Ellipse& e, double X, double Y) {
  const double phi = e.phi_deg * std::numbers::pi / 180.0;
  const double c = std::cos(phi), s = std::sin(phi);
  const double dx = X - e.x0, dy = Y - e.y0;
  const double u = (c * dx + s * dy) / e.a;
  const double v = (-s * dx + c * dy) / e.b;
  return u * u + v * v <= 1.0;
}

}  // namespace

UnitlessParams nondimensionalize(const PhysicalParams& p) {
  require_positive(p.K, "K");
  require_positive(p.rho, "rho");
  require_positive(p.theta_ref, "theta_ref");
  require_positive(p.c_p, "c_p");
  require_positive(p.alpha_phys, "alpha_phys");
  require_positive(p.L, "L");
  require_positive(p.c_phys, "c_phys");
  if (p.beta < 0.0 || !std::isfinite(p.beta))
    throw std::invalid_argument("nondimensionalize: beta must be >= 0");
  if (p.theta_ref < 100.0 || p.theta_ref > 500.0) {
    std::ostringstream os;
    os << "nondimensionalize: theta_ref = " << p.theta_ref
       << " K is outside the sanity window [100, 500] K";
    throw std::invalid_argument(os.str());
  }

  UnitlessParams u;
  const double c_ref = std::sqrt(p.K / p.rho);
  u.T = p.L / c_ref;
  u.c_hat = p.c_phys * u.T / p.L;  // = c_phys / c_ref
  u.alpha_hat = p.alpha_phys * u.T / (p.L * p.L);
  u.sigma = p.K / (p.theta_ref * p.rho * p.c_p);
  u.epsilon = p.beta * p.theta_ref;
  u.gruneisen = u.epsilon * u.sigma;

  if (p.theta_ref < 290.0 || p.theta_ref > 310.0)
    u.warnings.push_back(
        "theta_ref outside the typical soft-tissue range 290-310 K");
  if (std::abs(u.sigma - 1.0) > 1e-12) {
    std::ostringstream os;
    os << "sigma = " << u.sigma
       << " differs from 1; the governing equations are solved with sigma = 1";
    u.warnings.push_back(os.str());
  }
  return u;
}

Field nondimensionalize_speed(const Field& c_phys, const PhysicalParams& p) {
  require_positive(p.K, "K");
  require_positive(p.rho, "rho");
  if (!(c_phys.values.minCoeff() > 0.0))
    throw std::invalid_argument(
        "nondimensionalize_speed: speed field must be positive");
  const double c_ref = std::sqrt(p.K / p.rho);
  return Field(c_phys.grid, c_phys.values / c_ref);
}

void MediumFields::validate() const {
  require_same_grid(c, alpha, "MediumFields");
  require_same_grid(c, gamma, "MediumFields");
  if (!(c.values.minCoeff() > 0.0))
    throw std::invalid_argument("MediumFields: wave speed must be positive");
  if (!(alpha.values.minCoeff() > 0.0))
    throw std::invalid_argument("MediumFields: diffusivity must be positive");
  if (gamma.values.minCoeff() < 0.0)
    throw std::invalid_argument("MediumFields: impedance must be nonnegative");
  if (epsilon < 0.0)
    throw std::invalid_argument("MediumFields: epsilon must be nonnegative");
  const Grid2D& g = c.grid;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!g.is_boundary(i, j)) {
        if (gamma.values(i, j) != 0.0)
          throw std::invalid_argument(
              "MediumFields: impedance is only meaningful on boundary nodes");
        continue;
      }
      if (gamma.values(i, j) > 0.0 && !obs.contains(i, j)) {
        std::ostringstream os;
        os << "MediumFields: boundary node (" << i << ", " << j
           << ") has gamma > 0 but is not observed; the absorbing part of the "
              "boundary must be contained in the observed portion";
        throw std::invalid_argument(os.str());
      }
    }
}

Field gamma_from_speed(const Field& c) {
  Field g(c.grid);
  const Grid2D& gr = c.grid;
  for (int j = 0; j < gr.ny; ++j)
    for (int i = 0; i < gr.nx; ++i)
      if (gr.is_boundary(i, j)) g.values(i, j) = 1.0 / c.values(i, j);
  return g;
}

Field shepp_logan(const Grid2D& g, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw std::invalid_argument("shepp_logan: scale must be positive");
  Field f(g);
  const double w = g.width(), hgt = g.height();
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      // map the grid rectangle onto the phantom's [-1,1]^2 frame
      const double X = 2.0 * (g.x(i) - g.x0) / w - 1.0;
      const double Y = 2.0 * (g.y(j) - g.y0) / hgt - 1.0;
      double v = 0.0;
      for (const Ellipse& e : kSheppLogan)
        if (inside(e, X, Y)) v += e.value;
      f.values(i, j) = v;
    }
  }
  const double vmax = f.values.maxCoeff();
  if (vmax > 0.0) f.values = (f.values / vmax) * scale;
  return f;
}

Field gaussian_blob(const Grid2D& g, double cx, double cy, double sigma,
                    double amplitude) {
  if (!(sigma > 0.0))
    throw std::invalid_argument("gaussian_blob: sigma must be positive");
  return Field::from_function(g, [&](double x, double y) {
    const double dx = x - cx, dy = y - cy;
    return amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
  });
}

Field layered_speed(const Grid2D& g, double base, double layer_value,
                    const AnnulusSpec& r) {
  if (!(base > 0.0) || !(layer_value > 0.0))
    throw std::invalid_argument("layered_speed: speeds must be positive");
  if (!(r.a_inner < r.a_outer) || !(r.b_inner < r.b_outer))
    throw std::invalid_argument(
        "layered_speed: inner semi-axes must be smaller than outer ones");
  Array2D raw(g.nx, g.ny);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double dx = g.x(i) - r.cx, dy = g.y(j) - r.cy;
      const double qo = (dx * dx) / (r.a_outer * r.a_outer) +
                        (dy * dy) / (r.b_outer * r.b_outer);
      const double qi = (dx * dx) / (r.a_inner * r.a_inner) +
                        (dy * dy) / (r.b_inner * r.b_inner);
      raw(i, j) = (qo <= 1.0 && qi >= 1.0) ? layer_value : base;
    }
  }
  // One 9-point averaging pass (mirror at the boundary) to smooth the jump.
  Array2D sm(g.nx, g.ny);
  auto m = [&](int k, int n) { return k < 0 ? 1 : (k >= n ? n - 2 : k); };
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      double acc = 0.0;
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          const double wgt = (di == 0 ? 2.0 : 1.0) * (dj == 0 ? 2.0 : 1.0);
          acc += wgt * raw(m(i + di, g.nx), m(j + dj, g.ny));
        }
      sm(i, j) = acc / 16.0;
    }
  }
  return Field(g, std::move(sm));
}

ProjectedInitialData project_energy_space(const Field& p0, const Field& p1,
                                          const Field& theta0,
                                          const MediumFields& m) {
  require_same_grid(p0, p1, "project_energy_space");
  require_same_grid(p0, theta0, "project_energy_space");
  require_same_grid(p0, m.c, "project_energy_space");

  const BoundarySet bnd = BoundarySet::full_boundary(p0.grid);
  double gamma_mass = 0.0, gamma_p0 = 0.0;
  for (const auto& n : bnd.nodes) {
    const double gv = m.gamma.values(n.i, n.j);
    gamma_mass += n.w * gv;
    gamma_p0 += n.w * gv * p0.values(n.i, n.j);
  }
  if (!(gamma_mass > 0.0))
    throw std::invalid_argument(
        "project_energy_space: integrated boundary impedance vanishes; the "
        "constant-mode decomposition is undefined for fully reflective "
        "boundaries");

  const Field cinv2_p1(p0.grid, p1.values / m.c.values.square());
  const double p_const = (integral(cinv2_p1) + gamma_p0) / gamma_mass;

  const Field dev(p0.grid, theta0.values - m.epsilon * p0.values);
  const double area = p0.grid.width() * p0.grid.height();
  const double theta_const = integral(dev) / area + m.epsilon * p_const;

  ProjectedInitialData out;
  out.p0 = Field(p0.grid, p0.values - p_const);
  out.p1 = p1;
  out.theta0 = Field(p0.grid, theta0.values - theta_const);
  out.p_const = p_const;
  out.theta_const = theta_const;
  return out;
}

}  // namespace tpat
