#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"
#include "tpat/inversion.hpp"

#include <cmath>

using namespace tpat;
using tpat::test::kPi;

TEST_CASE("relative error: identity, zero estimate, homogeneity") {
  const Grid2D g = Grid2D::unit_square(33);
  const Field t = test::bandlimited_field(g, 2, 3);
  CHECK(relative_error_pct(t, t, CgMode::H0) == 0.0);
  CHECK(relative_error_pct(Field(g), t, CgMode::H0) ==
        doctest::Approx(100.0).epsilon(1e-12));
  const Field t11(g, 1.1 * t.values);
  CHECK(relative_error_pct(t11, t, CgMode::H0) ==
        doctest::Approx(10.0).epsilon(1e-10));
  CHECK(relative_error_pct(t11, t, CgMode::H1) ==
        doctest::Approx(10.0).epsilon(1e-10));
  CHECK_THROWS_AS((void)relative_error_pct(t, Field(g), CgMode::H0),
                  std::invalid_argument);
}

TEST_CASE("cg on the identity converges in one iteration") {
  const Grid2D g = Grid2D::unit_square(33);
  const Field zeta = test::bandlimited_field(g, 3, 4);
  CgOptions opt;
  opt.mode = CgMode::H0;
  opt.tol = 1e-12;
  const ReconReport rep =
      cg_solve([](const Field& f) { return f; }, zeta, Field(g), opt);
  CHECK(rep.residual_norms.size() == 2);  // initial plus one step
  CHECK((rep.estimate.values - zeta.values).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("cg matches the pointwise solution of a diagonal system") {
  const Grid2D g = Grid2D::unit_square(33);
  const Field d = Field::from_function(g, [](double x, double) { return 1.0 + x; });
  auto apply_N = [&](const Field& f) { return Field(g, d.values * f.values); };
  const Field zeta = test::random_field(g, 99);
  CgOptions opt;
  opt.mode = CgMode::H0;
  opt.tol = 1e-10;
  opt.k_max = 50;
  const ReconReport rep = cg_solve(apply_N, zeta, Field(g), opt);
  CHECK(int(rep.residual_norms.size()) - 1 <= 50);
  const Field exact(g, zeta.values / d.values);
  CHECK(relative_error_pct(rep.estimate, exact, CgMode::H0) <= 1e-6);
}

TEST_CASE("cg aborts on an indefinite operator") {
  const Grid2D g = Grid2D::unit_square(17);
  auto apply_N = [&](const Field& f) { return Field(g, -f.values); };
  const Field zeta = test::random_field(g, 5);
  CgOptions opt;
  opt.mode = CgMode::H0;
  CHECK_THROWS_AS(cg_solve(apply_N, zeta, Field(g), opt), CgError);
}

TEST_CASE("two-grid lift: zero input, linearity, high-frequency filtering") {
  const Grid2D g = Grid2D::unit_square(65);
  const TwoGridLift lift(g, 2);
  CHECK(norm_h0(lift.apply(Field(g))) == 0.0);

  const Field f1 = test::bandlimited_field(g, 2, 6);
  const Field f2 = test::bandlimited_field(g, 2, 7);
  const Field combo(g, 1.5 * f1.values - 0.5 * f2.values);
  const Field lin(g, 1.5 * lift.apply(f1).values - 0.5 * lift.apply(f2).values);
  CHECK((lift.apply(combo).values - lin.values).abs().maxCoeff() <= 1e-10);

  // full-weighting annihilates the checkerboard; a smooth field of the same
  // h0 norm passes nearly untouched
  Field nyq(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) nyq.values(i, j) = ((i + j) % 2) ? -1.0 : 1.0;
  Field smooth = test::bandlimited_field(g, 1, 8);
  smooth.values *= norm_h0(nyq) / norm_h0(smooth);
  const double r_nyq = norm_h1(lift.apply(nyq));
  const double r_smooth = norm_h1(lift.apply(smooth));
  CHECK(r_nyq <= 0.1 * r_smooth);

  CHECK_THROWS_AS(TwoGridLift(g, 3), std::invalid_argument);
}

TEST_CASE("measurement map: zero data, linearity, nondegeneracy") {
  const Grid2D g = Grid2D::unit_square(33);
  const MediumFields m = test::reference_medium(g);
  const SolverConfig cfg = SolverConfig::create(0.5, 0.5, g, m.c);
  ThermoWorkspace ws(m, cfg);

  CHECK(apply_M(Field(g), m, cfg, &ws).values.cwiseAbs().maxCoeff() == 0.0);

  const Field p0 = shepp_logan(g);
  const MeasurementTrace t1 = apply_M(p0, m, cfg, &ws);
  CHECK(t1.values.cwiseAbs().maxCoeff() > 0.0);

  const Field p0h(g, 0.5 * p0.values);
  const MeasurementTrace t2 = apply_M(p0h, m, cfg, &ws);
  CHECK((t2.values - 0.5 * t1.values).cwiseAbs().maxCoeff() <=
        1e-12 * t1.values.cwiseAbs().maxCoeff());
}

TEST_CASE("normal operator is symmetric and positive") {
  // The dual march mirrors the forward scheme closely enough that the
  // composed operator is self-adjoint to rounding (well under the few-percent
  // discretization budget), at both resolutions.
  for (const int n : {33, 65}) {
    const Grid2D g = Grid2D::unit_square(n);
    const MediumFields m = test::reference_medium(g);
    const SolverConfig cfg = SolverConfig::create(2.0, 0.5, g, m.c);
    ThermoWorkspace ws(m, cfg);
    auto N = [&](const Field& f) {
      return apply_M_star(apply_M(f, m, cfg, &ws), m, cfg, CgMode::H0, nullptr,
                          &ws);
    };
    const Field a = test::interior_bandlimited_field(g, 2, 11);
    const Field b = test::interior_bandlimited_field(g, 2, 12);
    const double nab = inner_h0(N(a), b);
    const double nba = inner_h0(N(b), a);
    CHECK(std::abs(nab - nba) / (norm_h0(a) * norm_h0(b)) <= 1e-12);
    CHECK(inner_h0(N(a), a) > 0.0);
    CHECK(inner_h0(N(b), b) > 0.0);
  }
}

TEST_CASE("ignoring real attenuation costs the baseline accuracy") {
  // Time reversal is model-consistent on lossless-coupling data, so its
  // error on an eps = 0 trace must beat its error on an eps = 0.1 trace.
  const Grid2D g = Grid2D::unit_square(65);
  const SolverConfig cfg = [&] {
    const MediumFields m = test::reference_medium(g);
    return SolverConfig::create(2.0, 0.5, g, m.c);
  }();
  const Field p0 = shepp_logan(g);
  auto tr_error = [&](double eps) {
    const MediumFields m = test::reference_medium(g, eps);
    const MeasurementTrace tr = apply_M(p0, m, cfg);
    return relative_error_pct(time_reversal(tr, m, cfg), p0, CgMode::H0);
  };
  CHECK(tr_error(0.0) < tr_error(0.1));
}

TEST_CASE("the data functional realizes the measurement-space h1 pairing") {
  // <(I - dtt - dss) d, e> under the space-time quadrature should equal the
  // h1 inner product of the data cylinder up to the boundary closures:
  // compare against a direct first-difference evaluation on smooth data.
  const Grid2D g = Grid2D::unit_square(33);
  const MediumFields m = test::reference_medium(g);
  const SolverConfig cfg = SolverConfig::create(1.0, 0.5, g, m.c);
  ThermoWorkspace ws(m, cfg);
  const MeasurementTrace d =
      apply_M(test::interior_bandlimited_field(g, 2, 61), m, cfg, &ws);
  const MeasurementTrace e =
      apply_M(test::interior_bandlimited_field(g, 2, 62), m, cfg, &ws);

  const BoundaryControl qd = h1_data_functional(d);
  const double lhs = spacetime_inner(qd.values, e.values, cfg.dt, d.nodes);

  // direct evaluation: L2 part + forward-difference time and arc derivatives
  double rhs = spacetime_inner(d.values, e.values, cfg.dt, d.nodes);
  Eigen::MatrixXd dt_d = d.values, dt_e = e.values;
  for (Eigen::Index r = 0; r + 1 < d.values.rows(); ++r) {
    dt_d.row(r) = (d.values.row(r + 1) - d.values.row(r)) / cfg.dt;
    dt_e.row(r) = (e.values.row(r + 1) - e.values.row(r)) / cfg.dt;
  }
  dt_d.row(d.values.rows() - 1).setZero();
  dt_e.row(d.values.rows() - 1).setZero();
  rhs += spacetime_inner(dt_d, dt_e, cfg.dt, d.nodes);

  Array2D mask = Array2D::Zero(g.nx, g.ny);
  for (const auto& n : d.nodes) mask(n.i, n.j) = 1.0;
  const auto chains = BoundarySet::from_mask(g, mask).chains();
  Eigen::MatrixXd ds_d = Eigen::MatrixXd::Zero(d.values.rows(), d.values.cols());
  Eigen::MatrixXd ds_e = ds_d;
  for (const auto& chain : chains) {
    const int n = int(chain.idx.size());
    for (int q = 0; q < n; ++q) {
      const int qp = chain.closed ? (q + 1) % n : std::min(q + 1, n - 1);
      if (qp == q) continue;
      ds_d.col(chain.idx[q]) =
          (d.values.col(chain.idx[qp]) - d.values.col(chain.idx[q])) / g.h;
      ds_e.col(chain.idx[q]) =
          (e.values.col(chain.idx[qp]) - e.values.col(chain.idx[q])) / g.h;
    }
  }
  rhs += spacetime_inner(ds_d, ds_e, cfg.dt, d.nodes);

  CHECK(lhs == doctest::Approx(rhs).epsilon(0.05));
}

TEST_CASE("time reversal of a zero trace is zero") {
  const Grid2D g = Grid2D::unit_square(33);
  const MediumFields m = test::reference_medium(g);
  const SolverConfig cfg = SolverConfig::create(0.5, 0.5, g, m.c);
  MeasurementTrace tr;
  tr.grid = g;
  tr.dt = cfg.dt;
  tr.nodes = m.obs.nodes;
  tr.values = Eigen::MatrixXd::Zero(cfg.n_steps + 1,
                                    Eigen::Index(m.obs.nodes.size()));
  CHECK(norm_h0(time_reversal(tr, m, cfg)) == 0.0);
}

TEST_CASE("reconstruction improves on time reversal in both norms") {
  const Grid2D g = Grid2D::unit_square(65);
  const MediumFields m = test::reference_medium(g);
  const SolverConfig cfg = SolverConfig::create(2.0, 0.5, g, m.c);
  ThermoWorkspace ws(m, cfg);
  const Field p0 = shepp_logan(g);
  const MeasurementTrace tr = apply_M(p0, m, cfg, &ws);

  for (const CgMode mode : {CgMode::H0, CgMode::H1}) {
    CgOptions opt;
    opt.mode = mode;
    opt.k_max = 3;
    opt.tol = 1e-10;
    const ReconReport rep = reconstruct(tr, m, cfg, opt, &p0);
    REQUIRE(rep.iterations.size() >= 2);
    CHECK(rep.iterations.back().err_h0_pct <= rep.iterations.front().err_h0_pct);
    CHECK(rep.iterations.back().err_h1_pct <= rep.iterations.front().err_h1_pct);
    // residuals decrease until the tolerance
    for (std::size_t k = 1; k < rep.residual_norms.size(); ++k)
      CHECK(rep.residual_norms[k] <= rep.residual_norms[k - 1] * (1.0 + 1e-12));
  }
}

TEST_CASE("noiseless trace with epsilon = 0 still beats its time reversal") {
  const Grid2D g = Grid2D::unit_square(65);
  MediumFields m = test::reference_medium(g, 0.0);  // gamma = 1, no coupling
  const SolverConfig cfg = SolverConfig::create(2.0, 0.5, g, m.c);
  ThermoWorkspace ws(m, cfg);
  const Field p0 = shepp_logan(g);
  const MeasurementTrace tr = apply_M(p0, m, cfg, &ws);
  CgOptions opt;
  opt.mode = CgMode::H0;
  opt.k_max = 5;
  const ReconReport rep = reconstruct(tr, m, cfg, opt, &p0);
  CHECK(rep.iterations.back().err_h0_pct < rep.iterations.front().err_h0_pct);
}

TEST_CASE("reconstruction scales with the trace") {
  const Grid2D g = Grid2D::unit_square(33);
  const MediumFields m = test::reference_medium(g);
  const SolverConfig cfg = SolverConfig::create(1.0, 0.5, g, m.c);
  ThermoWorkspace ws(m, cfg);
  const MeasurementTrace tr = apply_M(shepp_logan(g), m, cfg, &ws);
  MeasurementTrace tr2 = tr;
  tr2.values *= 2.0;

  CgOptions opt;
  opt.mode = CgMode::H0;
  opt.k_max = 3;
  const ReconReport a = reconstruct(tr, m, cfg, opt);
  const ReconReport b = reconstruct(tr2, m, cfg, opt);
  const double diff =
      (b.estimate.values - 2.0 * a.estimate.values).abs().maxCoeff();
  CHECK(diff <= 1e-8 * b.estimate.values.abs().maxCoeff());
}

TEST_CASE("one percent trace noise costs at most five points of h0 error") {
  const Grid2D g = Grid2D::unit_square(65);
  const MediumFields m = test::reference_medium(g);
  const SolverConfig cfg = SolverConfig::create(2.0, 0.5, g, m.c);
  ThermoWorkspace ws(m, cfg);
  const Field p0 = shepp_logan(g);
  const MeasurementTrace clean = apply_M(p0, m, cfg, &ws);

  MeasurementTrace noisy = clean;
  const double rms = std::sqrt(noisy.values.squaredNorm() /
                               double(noisy.values.size()));
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> dist(0.0, 0.01 * rms);
  for (Eigen::Index r = 0; r < noisy.values.rows(); ++r)
    for (Eigen::Index q = 0; q < noisy.values.cols(); ++q)
      noisy.values(r, q) += dist(rng);

  CgOptions opt;
  opt.mode = CgMode::H0;
  opt.k_max = 5;
  const ReconReport a = reconstruct(clean, m, cfg, opt, &p0);
  const ReconReport b = reconstruct(noisy, m, cfg, opt, &p0);
  CHECK(b.iterations.back().err_h0_pct <=
        a.iterations.back().err_h0_pct + 5.0);
}
