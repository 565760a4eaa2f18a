#include "tpat/grid.hpp"

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

}  // namespace

Grid2D::Grid2D(int nx_, int ny_, double h_, double x0_, double y0_)
    : nx(nx_), ny(ny_), h(h_), x0(x0_), y0(y0_) {
  if (nx < 3 || ny < 3)
    throw std::invalid_argument("Grid2D: need nx >= 3 and ny >= 3");
  if (!(h > 0.0) || !std::isfinite(h))
    throw std::invalid_argument("Grid2D: spacing h must be positive");
}

Grid2D Grid2D::unit_square(int n) { return Grid2D(n, n, 1.0 / (n - 1)); }

Field::Field(const Grid2D& g, Array2D v) : grid(g), values(std::move(v)) {
  if (values.rows() != g.nx || values.cols() != g.ny)
    throw std::invalid_argument("Field: value shape does not match grid");
  require_finite(values, "Field");
}

void require_finite(const Array2D& v, const std::string& what) {
  if (v.allFinite()) return;
  for (int j = 0; j < v.cols(); ++j)
    for (int i = 0; i < v.rows(); ++i)
      if (!std::isfinite(v(i, j))) {
        std::ostringstream os;
        os << what << ": non-finite value at node (" << i << ", " << j << ")";
        throw std::invalid_argument(os.str());
      }
}

void require_same_grid(const Field& a, const Field& b, const std::string& what) {
  if (!(a.grid == b.grid))
    throw std::invalid_argument(what + ": fields live on different grids");
}

// --- BoundarySet -------------------------------------------------------------

BoundarySet BoundarySet::build(const Grid2D& g,
                               const std::vector<std::uint8_t>& on) {
  BoundarySet bs;
  bs.grid = g;
  bs.lookup_ = on;
  auto at = [&](int i, int j) -> bool { return on[std::size_t(j) * g.nx + i]; };
  // Weight = h/2 per adjacent boundary segment with both endpoints selected.
  auto weight = [&](int i, int j) {
    double w = 0.0;
    if (j == 0 || j == g.ny - 1) {  // horizontal sides
      if (i > 0 && at(i - 1, j)) w += 0.5 * g.h;
      if (i < g.nx - 1 && at(i + 1, j)) w += 0.5 * g.h;
    }
    if (i == 0 || i == g.nx - 1) {  // vertical sides
      if (j > 0 && at(i, j - 1)) w += 0.5 * g.h;
      if (j < g.ny - 1 && at(i, j + 1)) w += 0.5 * g.h;
    }
    return w;
  };
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (at(i, j)) bs.nodes.push_back({i, j, weight(i, j)});
  return bs;
}

BoundarySet BoundarySet::full_boundary(const Grid2D& g) {
  return sides(g, true, true, true, true);
}

BoundarySet BoundarySet::sides(const Grid2D& g, bool left, bool right,
                               bool bottom, bool top) {
  std::vector<std::uint8_t> on(std::size_t(g.nx) * g.ny, 0);
  auto mark = [&](int i, int j) { on[std::size_t(j) * g.nx + i] = 1; };
  for (int j = 0; j < g.ny; ++j) {
    if (left) mark(0, j);
    if (right) mark(g.nx - 1, j);
  }
  for (int i = 0; i < g.nx; ++i) {
    if (bottom) mark(i, 0);
    if (top) mark(i, g.ny - 1);
  }
  return build(g, on);
}

BoundarySet BoundarySet::from_mask(const Grid2D& g, const Array2D& mask) {
  if (mask.rows() != g.nx || mask.cols() != g.ny)
    throw std::invalid_argument("BoundarySet: mask shape does not match grid");
  std::vector<std::uint8_t> on(std::size_t(g.nx) * g.ny, 0);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (mask(i, j) != 0.0) {
        if (!g.is_boundary(i, j)) {
          std::ostringstream os;
          os << "BoundarySet: flagged node (" << i << ", " << j
             << ") is not a boundary node";
          throw std::invalid_argument(os.str());
        }
        on[std::size_t(j) * g.nx + i] = 1;
      }
  return build(g, on);
}

bool BoundarySet::contains(int i, int j) const {
  if (i < 0 || j < 0 || i >= grid.nx || j >= grid.ny) return false;
  return lookup_[std::size_t(j) * grid.nx + i] != 0;
}

Eigen::VectorXd BoundarySet::extract(const Field& f) const {
  if (!(f.grid == grid))
    throw std::invalid_argument("BoundarySet::extract: grid mismatch");
  Eigen::VectorXd out(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k)
    out(k) = f.values(nodes[k].i, nodes[k].j);
  return out;
}

std::vector<BoundarySet::Chain> BoundarySet::chains() const {
  // Perimeter walk: bottom left-to-right, right side up, top right-to-left,
  // left side down. Every boundary node appears exactly once.
  std::vector<std::pair<int, int>> walk;
  walk.reserve(2 * std::size_t(grid.nx + grid.ny));
  for (int i = 0; i < grid.nx; ++i) walk.emplace_back(i, 0);
  for (int j = 1; j < grid.ny; ++j) walk.emplace_back(grid.nx - 1, j);
  for (int i = grid.nx - 2; i >= 0; --i) walk.emplace_back(i, grid.ny - 1);
  for (int j = grid.ny - 2; j >= 1; --j) walk.emplace_back(0, j);

  // node index lookup within `nodes` (scan ordered)
  std::vector<int> node_of(std::size_t(grid.nx) * grid.ny, -1);
  for (std::size_t k = 0; k < nodes.size(); ++k)
    node_of[std::size_t(nodes[k].j) * grid.nx + nodes[k].i] = int(k);

  const std::size_t n = walk.size();
  auto member = [&](std::size_t w) {
    const auto [i, j] = walk[w];
    return node_of[std::size_t(j) * grid.nx + i];
  };

  // rotate the starting point to a gap so runs do not wrap
  std::size_t start = 0;
  bool gap_found = false;
  for (std::size_t w = 0; w < n; ++w)
    if (member(w) < 0) {
      start = w;
      gap_found = true;
      break;
    }

  std::vector<Chain> out;
  if (!gap_found) {
    Chain c;
    c.closed = true;
    for (std::size_t w = 0; w < n; ++w) c.idx.push_back(member(w));
    if (!c.idx.empty()) out.push_back(std::move(c));
    return out;
  }
  Chain cur;
  for (std::size_t o = 0; o < n; ++o) {
    const int k = member((start + o) % n);
    if (k >= 0) {
      cur.idx.push_back(k);
    } else if (!cur.idx.empty()) {
      out.push_back(std::move(cur));
      cur = Chain{};
    }
  }
  if (!cur.idx.empty()) out.push_back(std::move(cur));
  return out;
}

// --- stencils ----------------------------------------------------------------

void laplacian_into(const Array2D& f, double h, Array2D& out) {
  const int nx = int(f.rows());
  const int ny = int(f.cols());
  const double ih2 = 1.0 / (h * h);
  out.resize(nx, ny);

  out.block(1, 1, nx - 2, ny - 2) =
      (f.block(0, 1, nx - 2, ny - 2) + f.block(2, 1, nx - 2, ny - 2) +
       f.block(1, 0, nx - 2, ny - 2) + f.block(1, 2, nx - 2, ny - 2) -
       4.0 * f.block(1, 1, nx - 2, ny - 2)) *
      ih2;

  // Edges with mirror ghost (ghost = opposite interior neighbor).
  out.block(0, 1, 1, ny - 2) =
      (2.0 * f.block(1, 1, 1, ny - 2) + f.block(0, 0, 1, ny - 2) +
       f.block(0, 2, 1, ny - 2) - 4.0 * f.block(0, 1, 1, ny - 2)) *
      ih2;
  out.block(nx - 1, 1, 1, ny - 2) =
      (2.0 * f.block(nx - 2, 1, 1, ny - 2) + f.block(nx - 1, 0, 1, ny - 2) +
       f.block(nx - 1, 2, 1, ny - 2) - 4.0 * f.block(nx - 1, 1, 1, ny - 2)) *
      ih2;
  out.block(1, 0, nx - 2, 1) =
      (f.block(0, 0, nx - 2, 1) + f.block(2, 0, nx - 2, 1) +
       2.0 * f.block(1, 1, nx - 2, 1) - 4.0 * f.block(1, 0, nx - 2, 1)) *
      ih2;
  out.block(1, ny - 1, nx - 2, 1) =
      (f.block(0, ny - 1, nx - 2, 1) + f.block(2, ny - 1, nx - 2, 1) +
       2.0 * f.block(1, ny - 2, nx - 2, 1) -
       4.0 * f.block(1, ny - 1, nx - 2, 1)) *
      ih2;

  out(0, 0) = (2.0 * f(1, 0) + 2.0 * f(0, 1) - 4.0 * f(0, 0)) * ih2;
  out(nx - 1, 0) =
      (2.0 * f(nx - 2, 0) + 2.0 * f(nx - 1, 1) - 4.0 * f(nx - 1, 0)) * ih2;
  out(0, ny - 1) =
      (2.0 * f(1, ny - 1) + 2.0 * f(0, ny - 2) - 4.0 * f(0, ny - 1)) * ih2;
  out(nx - 1, ny - 1) = (2.0 * f(nx - 2, ny - 1) + 2.0 * f(nx - 1, ny - 2) -
                         4.0 * f(nx - 1, ny - 1)) *
                        ih2;
}

Field laplacian(const Field& f) {
  require_finite(f.values, "laplacian");
  Field out(f.grid);
  laplacian_into(f.values, f.grid.h, out.values);
  return out;
}

double inner_h0(const Field& f, const Field& g) {
  require_same_grid(f, g, "inner_h0");
  const Eigen::VectorXd wx = trapezoid_weights(f.grid.nx, f.grid.h);
  const Eigen::VectorXd wy = trapezoid_weights(f.grid.ny, f.grid.h);
  // sum_ij wx_i wy_j f_ij g_ij, reduced column-by-column for fixed order
  return wx.dot((f.values * g.values).matrix() * wy);
}

double norm_h0(const Field& f) { return std::sqrt(std::max(0.0, inner_h0(f, f))); }

double integral(const Field& f) {
  const Eigen::VectorXd wx = trapezoid_weights(f.grid.nx, f.grid.h);
  const Eigen::VectorXd wy = trapezoid_weights(f.grid.ny, f.grid.h);
  return wx.dot(f.values.matrix() * wy);
}

Array2D grad_x(const Field& f) {
  const int nx = f.grid.nx, ny = f.grid.ny;
  const double h = f.grid.h;
  Array2D out(nx, ny);
  out.block(1, 0, nx - 2, ny) =
      (f.values.block(2, 0, nx - 2, ny) - f.values.block(0, 0, nx - 2, ny)) /
      (2.0 * h);
  out.row(0) = (f.values.row(1) - f.values.row(0)) / h;
  out.row(nx - 1) = (f.values.row(nx - 1) - f.values.row(nx - 2)) / h;
  return out;
}

Array2D grad_y(const Field& f) {
  const int nx = f.grid.nx, ny = f.grid.ny;
  const double h = f.grid.h;
  Array2D out(nx, ny);
  out.block(0, 1, nx, ny - 2) =
      (f.values.block(0, 2, nx, ny - 2) - f.values.block(0, 0, nx, ny - 2)) /
      (2.0 * h);
  out.col(0) = (f.values.col(1) - f.values.col(0)) / h;
  out.col(ny - 1) = (f.values.col(ny - 1) - f.values.col(ny - 2)) / h;
  return out;
}

double inner_h1(const Field& f, const Field& g) {
  require_same_grid(f, g, "inner_h1");
  double s = inner_h0(f, g);
  const Field fx(f.grid, grad_x(f)), gx(g.grid, grad_x(g));
  const Field fy(f.grid, grad_y(f)), gy(g.grid, grad_y(g));
  s += inner_h0(fx, gx);
  s += inner_h0(fy, gy);
  return s;
}

double norm_h1(const Field& f) { return std::sqrt(std::max(0.0, inner_h1(f, f))); }

double boundary_inner(std::span<const double> tr1, std::span<const double> tr2,
                      const BoundarySet& bset) {
  if (tr1.size() != bset.nodes.size() || tr2.size() != bset.nodes.size())
    throw std::invalid_argument(
        "boundary_inner: trace length does not match boundary set");
  double s = 0.0;
  for (std::size_t k = 0; k < bset.nodes.size(); ++k)
    s += bset.nodes[k].w * tr1[k] * tr2[k];
  return s;
}

// --- two-grid transfer -------------------------------------------------------

Grid2D coarsen(const Grid2D& g) {
  if ((g.nx - 1) % 2 != 0 || (g.ny - 1) % 2 != 0)
    throw std::invalid_argument(
        "coarsen: nx-1 and ny-1 must be even for factor-2 coarsening");
  return Grid2D((g.nx - 1) / 2 + 1, (g.ny - 1) / 2 + 1, 2.0 * g.h, g.x0, g.y0);
}

Grid2D refine(const Grid2D& g) {
  return Grid2D(2 * (g.nx - 1) + 1, 2 * (g.ny - 1) + 1, 0.5 * g.h, g.x0, g.y0);
}

Field restrict_full_weighting(const Field& fine) {
  const Grid2D cg = coarsen(fine.grid);
  const Grid2D& fg = fine.grid;
  const Eigen::VectorXd wxf = trapezoid_weights(fg.nx, fg.h);
  const Eigen::VectorXd wyf = trapezoid_weights(fg.ny, fg.h);
  const Eigen::VectorXd wxc = trapezoid_weights(cg.nx, cg.h);
  const Eigen::VectorXd wyc = trapezoid_weights(cg.ny, cg.h);

  // Adjoint of bilinear prolongation under the trapezoid inner products:
  // interior nodes get the classic 9-point full weighting, boundary stencils
  // follow from the weight ratios.
  Field out(cg);
  for (int J = 0; J < cg.ny; ++J) {
    for (int I = 0; I < cg.nx; ++I) {
      const int ic = 2 * I, jc = 2 * J;
      double acc = 0.0;
      for (int dj = -1; dj <= 1; ++dj) {
        const int j = jc + dj;
        if (j < 0 || j >= fg.ny) continue;
        for (int di = -1; di <= 1; ++di) {
          const int i = ic + di;
          if (i < 0 || i >= fg.nx) continue;
          const double p = (di == 0 ? 1.0 : 0.5) * (dj == 0 ? 1.0 : 0.5);
          acc += wxf(i) * wyf(j) * p * fine.values(i, j);
        }
      }
      out.values(I, J) = acc / (wxc(I) * wyc(J));
    }
  }
  return out;
}

Field prolong_bilinear(const Field& coarse) {
  const Grid2D fg = refine(coarse.grid);
  Field out(fg);
  const auto& cv = coarse.values;
  for (int J = 0; J < coarse.grid.ny; ++J)
    for (int I = 0; I < coarse.grid.nx; ++I) out.values(2 * I, 2 * J) = cv(I, J);
  for (int J = 0; J < coarse.grid.ny; ++J)
    for (int I = 0; I + 1 < coarse.grid.nx; ++I)
      out.values(2 * I + 1, 2 * J) = 0.5 * (cv(I, J) + cv(I + 1, J));
  for (int j = 0; j + 1 < fg.ny; j += 2)
    for (int i = 0; i < fg.nx; ++i)
      out.values(i, j + 1) = 0.5 * (out.values(i, j) + out.values(i, j + 2));
  return out;
}

// --- Poisson -------------------------------------------------------------------

PoissonDirichlet::PoissonDirichlet(const Grid2D& g, double tol)
    : grid_(g), tol_(tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("PoissonDirichlet: tol must be > 0");
  const int mx = g.nx - 2, my = g.ny - 2;
  const double ih2 = 1.0 / (g.h * g.h);
  auto id = [&](int i, int j) { return (i - 1) + std::ptrdiff_t(j - 1) * mx; };
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(std::size_t(5) * mx * my);
  for (int j = 1; j <= my; ++j) {
    for (int i = 1; i <= mx; ++i) {
      const auto r = id(i, j);
      trips.emplace_back(r, r, 4.0 * ih2);
      if (i > 1) trips.emplace_back(r, id(i - 1, j), -ih2);
      if (i < mx) trips.emplace_back(r, id(i + 1, j), -ih2);
      if (j > 1) trips.emplace_back(r, id(i, j - 1), -ih2);
      if (j < my) trips.emplace_back(r, id(i, j + 1), -ih2);
    }
  }
  Eigen::SparseMatrix<double> A(mx * my, mx * my);
  A.setFromTriplets(trips.begin(), trips.end());
  ldlt_.compute(A);
  if (ldlt_.info() != Eigen::Success)
    throw std::runtime_error("PoissonDirichlet: factorization failed");
}

Field PoissonDirichlet::solve(const Field& rhs) const {
  if (!(rhs.grid == grid_))
    throw std::invalid_argument("PoissonDirichlet::solve: grid mismatch");
  require_finite(rhs.values, "PoissonDirichlet rhs");
  const int mx = grid_.nx - 2, my = grid_.ny - 2;
  Eigen::VectorXd b(mx * my);
  for (int j = 1; j <= my; ++j)
    for (int i = 1; i <= mx; ++i)
      b[(i - 1) + std::ptrdiff_t(j - 1) * mx] = rhs.values(i, j);

  const double bnorm = b.norm();
  Field u(grid_);
  if (bnorm == 0.0) return u;

  const Eigen::VectorXd x = ldlt_.solve(b);
  for (int j = 1; j <= my; ++j)
    for (int i = 1; i <= mx; ++i)
      u.values(i, j) = x[(i - 1) + std::ptrdiff_t(j - 1) * mx];

  // Verify the 5-point residual against the requested tolerance.
  Array2D lap;
  laplacian_into(u.values, grid_.h, lap);
  double rnorm2 = 0.0;
  for (int j = 1; j <= my; ++j)
    for (int i = 1; i <= mx; ++i) {
      const double r = rhs.values(i, j) + lap(i, j);
      rnorm2 += r * r;
    }
  const double rel = std::sqrt(rnorm2) / bnorm;
  if (!(rel <= tol_)) {
    std::ostringstream os;
    os << "PoissonDirichlet: residual " << rel << " exceeds tolerance " << tol_;
    throw std::runtime_error(os.str());
  }
  return u;
}

Field poisson_dirichlet(const Field& rhs, double tol) {
  return PoissonDirichlet(rhs.grid, tol).solve(rhs);
}

}  // namespace tpat
