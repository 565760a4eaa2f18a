#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tpat {

// Node values of a (nx, ny) grid function. Column j holds the grid line
// y = y_j, so x runs contiguously in memory.
using Array2D = Eigen::ArrayXXd;

/// Uniform node-centered grid with square cells on an axis-aligned rectangle.
struct Grid2D {
  int nx = 0;
  int ny = 0;
  double h = 0.0;
  double x0 = 0.0;
  double y0 = 0.0;

  Grid2D() = default;
  Grid2D(int nx, int ny, double h, double x0 = 0.0, double y0 = 0.0);

  /// n x n nodes on [0,1]^2 with spacing h = 1/(n-1).
  static Grid2D unit_square(int n);

  double x(int i) const { return x0 + h * i; }
  double y(int j) const { return y0 + h * j; }
  std::ptrdiff_t num_nodes() const { return std::ptrdiff_t(nx) * ny; }
  double width() const { return h * (nx - 1); }
  double height() const { return h * (ny - 1); }

  bool is_boundary(int i, int j) const {
    return i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
  }
  /// Number of domain sides the node lies on: 0 interior, 1 edge, 2 corner.
  int exposed_sides(int i, int j) const {
    return int(i == 0 || i == nx - 1) + int(j == 0 || j == ny - 1);
  }

  friend bool operator==(const Grid2D&, const Grid2D&) = default;
};

/// Scalar grid function. Entries are finite by construction.
struct Field {
  Grid2D grid;
  Array2D values;

  Field() = default;
  explicit Field(const Grid2D& g) : grid(g), values(Array2D::Zero(g.nx, g.ny)) {}
  Field(const Grid2D& g, Array2D v);

  double operator()(int i, int j) const { return values(i, j); }
  double& operator()(int i, int j) { return values(i, j); }

  template <class F>
  static Field from_function(const Grid2D& g, F&& f) {
    Array2D v(g.nx, g.ny);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) v(i, j) = f(g.x(i), g.y(j));
    return Field(g, std::move(v));
  }
};

/// Throws std::invalid_argument naming the first non-finite node.
void require_finite(const Array2D& v, const std::string& what);
void require_same_grid(const Field& a, const Field& b, const std::string& what);

/// Subset of boundary nodes with arc-length quadrature weights.
///
/// Nodes are listed in scan order (j outer, i inner). A node's weight is
/// h/2 per adjacent selected boundary segment, so weights sum to the arc
/// length of the selected portion.
struct BoundarySet {
  struct Node {
    int i = 0;
    int j = 0;
    double w = 0.0;
  };

  Grid2D grid;
  std::vector<Node> nodes;

  static BoundarySet full_boundary(const Grid2D& g);
  static BoundarySet sides(const Grid2D& g, bool left, bool right, bool bottom,
                           bool top);
  /// Builds from a 0/1 node mask over the whole grid; flagged nodes must lie
  /// on the boundary.
  static BoundarySet from_mask(const Grid2D& g, const Array2D& mask);

  std::size_t size() const { return nodes.size(); }
  bool contains(int i, int j) const;
  /// Extracts field values at the member nodes, in member order.
  Eigen::VectorXd extract(const Field& f) const;

  /// Maximal runs of member nodes along the perimeter walk, as indices into
  /// `nodes`. Adjacent entries are one grid spacing apart in arc length;
  /// a chain is closed when the run wraps the whole boundary.
  struct Chain {
    std::vector<int> idx;
    bool closed = false;
  };
  std::vector<Chain> chains() const;

 private:
  static BoundarySet build(const Grid2D& g, const std::vector<std::uint8_t>& on);
  std::vector<std::uint8_t> lookup_;  // nx*ny bitmap
};

// --- discrete calculus -----------------------------------------------------

/// 5-point Laplacian with mirror (homogeneous Neumann) ghost closure.
/// Callers needing a different closure add their boundary corrections on top.
Field laplacian(const Field& f);

/// Unchecked in-place kernel behind laplacian(); used by the time steppers.
void laplacian_into(const Array2D& f, double h, Array2D& out);

/// Trapezoid-weighted discrete L2 pairing: sum w_ij f_ij g_ij with
/// w = h^2 interior, h^2/2 edges, h^2/4 corners.
double inner_h0(const Field& f, const Field& g);
double norm_h0(const Field& f);

/// inner_h0 plus the pairing of central-difference gradients
/// (one-sided at the boundary).
double inner_h1(const Field& f, const Field& g);
double norm_h1(const Field& f);

/// Integral of f over the domain (trapezoid weights).
double integral(const Field& f);

/// x/y derivative arrays used by the H1 pairing. Central differences inside,
/// one-sided at the boundary.
Array2D grad_x(const Field& f);
Array2D grad_y(const Field& f);

/// Surface quadrature: sum of arc weights times tr1*tr2 over the set's nodes.
double boundary_inner(std::span<const double> tr1, std::span<const double> tr2,
                      const BoundarySet& bset);

// --- two-grid transfer -----------------------------------------------------

/// Factor-2 coarsening; requires nx-1 and ny-1 even.
Grid2D coarsen(const Grid2D& g);
Grid2D refine(const Grid2D& g);

/// Full-weighting restriction (adjoint of bilinear prolongation under the
/// trapezoid inner products; boundary stencils follow from the weights).
Field restrict_full_weighting(const Field& fine);
/// Bilinear interpolation onto the factor-2 refined grid.
Field prolong_bilinear(const Field& coarse);

// --- elliptic solve ----------------------------------------------------------

/// Prefactored homogeneous-Dirichlet solve of -lap(u) = rhs (5-point stencil).
class PoissonDirichlet {
 public:
  explicit PoissonDirichlet(const Grid2D& g, double tol = 1e-10);

  /// Returns u with zero boundary values; verifies the discrete residual is
  /// within tol relative to |rhs| and throws std::runtime_error otherwise.
  Field solve(const Field& rhs) const;

  const Grid2D& grid() const { return grid_; }

 private:
  Grid2D grid_;
  double tol_ = 1e-10;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

/// One-shot convenience wrapper around PoissonDirichlet.
Field poisson_dirichlet(const Field& rhs, double tol = 1e-10);

}  // namespace tpat
