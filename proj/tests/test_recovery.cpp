#include <doctest.h>

#include <random>
#include <sstream>

#include "decpep/recovery.hpp"
#include "test_support.hpp"

using namespace decpep;
using namespace decpep::testing;

TEST_CASE("identity Gram factors to an orthonormal triple") {
  ReconstructedInstance inst =
      factor_gram(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd(0));
  CHECK(inst.dimension == 3);
  Eigen::MatrixXd back = inst.coords.transpose() * inst.coords;
  CHECK((back - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("rank-one Gram gives identical unit points") {
  ReconstructedInstance inst = factor_gram(Eigen::MatrixXd::Ones(2, 2), Eigen::VectorXd(0));
  CHECK(inst.dimension == 1);
  CHECK(inst.coords.col(0).norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((inst.coords.col(0) - inst.coords.col(1)).norm() <= 1e-12);
}

TEST_CASE("factor and recompose round trip on random PSD matrices") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const int n = 3 + t % 5;
    Eigen::MatrixXd p = random_gaussian(1 + t % 3, n, rng);
    Eigen::MatrixXd g = p.transpose() * p;
    ReconstructedInstance inst = factor_gram(g, Eigen::VectorXd(0), 1e-9);
    Eigen::MatrixXd back = inst.coords.transpose() * inst.coords;
    const double lmax = g.diagonal().maxCoeff();
    CHECK((back - g).cwiseAbs().maxCoeff() <= 10 * 1e-9 * std::max(lmax, 1.0));
    CHECK(inst.dimension <= std::min<int>(1 + t % 3, n));
  }
}

TEST_CASE("indefinite matrices are rejected") {
  Eigen::MatrixXd g(2, 2);
  g << 1.0, 0.0, 0.0, -0.5;
  CHECK_THROWS_AS(factor_gram(g, Eigen::VectorXd(0)), std::invalid_argument);
}

TEST_CASE("w1 matrix entries, spectrum and stochasticity") {
  ExplicitMatrix w = w1_matrix(3, 0.8);
  CHECK(w.entries(0, 1) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(w.entries(0, 0) == doctest::Approx(-0.2).epsilon(1e-14));
  MembershipReport rep = membership_check(w, SpectralClass::symmetric(0.8), 1e-12);
  CHECK(rep.member);
  CHECK(rep.spectrum(1) == doctest::Approx(-0.8).epsilon(1e-13));
  CHECK(rep.spectrum(2) == doctest::Approx(-0.8).epsilon(1e-13));

  ExplicitMatrix swap = w1_matrix(2, 1.0);
  CHECK(swap.entries(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(swap.entries(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  MembershipReport rs = membership_check(swap, SpectralClass(-1.0, 1.0), 1e-12);
  CHECK(rs.spectrum(1) == doctest::Approx(-1.0));

  // entrywise nonnegative exactly when lam <= 1/(N-1)
  CHECK(w1_matrix(3, 0.5).entries.minCoeff() >= -1e-15);
  CHECK(w1_matrix(3, 0.51).entries.minCoeff() < 0.0);

  for (int n : {2, 3, 5, 8})
    for (double lam : {-0.5, 0.0, 0.3, 0.9, 1.0}) {
      ExplicitMatrix m = w1_matrix(n, lam);
      Eigen::VectorXd rows = m.entries.rowwise().sum();
      CHECK((rows - Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff() <= 1e-15);
      MembershipReport r = membership_check(m, SpectralClass(-1.0, 1.0), 1e-12);
      for (int i = 1; i < n; ++i)
        CHECK(r.spectrum(i) == doctest::Approx(-lam).epsilon(1e-12));
    }

  CHECK_THROWS_AS(w1_matrix(1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(w1_matrix(3, 1.5), std::invalid_argument);
}

TEST_CASE("exact recovery from synthetic full-rank data") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 8; ++t) {
    const int n = 3 + t % 3;
    Eigen::VectorXd mu(n - 1);
    for (int i = 0; i < n - 1; ++i) mu(i) = -0.9 + 1.7 * (i + 1) / n;
    Eigen::MatrixXd w = matrix_with_spectrum(mu, rng);
    Eigen::MatrixXd x = random_gaussian(n, n + 3, rng);
    RecoveredMatrix rec = estimate_matrix(x, w * x, SpectralClass(-1.0, 1.0));
    CHECK((rec.what.entries - w).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(rec.residual <= 1e-12);
    CHECK_FALSE(rec.x_rank_deficient);
  }

  ExplicitMatrix w1 = w1_matrix(3, 0.8);
  Eigen::MatrixXd x = random_gaussian(3, 6, rng);
  RecoveredMatrix rec = estimate_matrix(x, w1.entries * x, SpectralClass::symmetric(0.8));
  CHECK((rec.what.entries - w1.entries).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(rec.membership.member);
}

TEST_CASE("rank-deficient data is flagged and fit minimum-norm") {
  // all agents identical: X has rank one
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 4);
  Eigen::MatrixXd y = Eigen::MatrixXd::Ones(3, 4);
  RecoveredMatrix rec = estimate_matrix(x, y, SpectralClass(-1.0, 1.0));
  CHECK(rec.x_rank_deficient);
  CHECK(rec.residual <= 1e-12);  // consistent system, exact fit
  // minimum-norm solution of Y = WX with these data is J/3
  CHECK((rec.what.entries - Eigen::MatrixXd::Constant(3, 3, 1.0 / 3)).cwiseAbs().maxCoeff() <=
        1e-12);

  CHECK_THROWS_AS(estimate_matrix(Eigen::MatrixXd::Zero(3, 4), y, SpectralClass(-1., 1.)),
                  std::invalid_argument);
}

TEST_CASE("round trip through a solved spectral instance") {
  DgdSpec spec;
  spec.n_agents = 2;
  spec.n_iters = 2;
  spec.mode = MatrixMode::Spectral;
  spec.cls = SpectralClass::symmetric(0.6);
  DgdBuild b = build_dgd(spec);
  PepSolution s = solve_pep(b.problem);
  REQUIRE(s.sdp.status == SolveStatus::Optimal);

  ReconstructedInstance inst = factor_gram(s.gram, s.fvals, 1e-7);
  Eigen::MatrixXd back = inst.coords.transpose() * inst.coords;
  CHECK((back - s.gram).cwiseAbs().maxCoeff() <= 1e-6);

  RecoveredMatrix rec = estimate_worst_matrix(inst, b, spec);
  CHECK(rec.what.size() == 2);
  CHECK(rec.residual >= 0.0);
}

TEST_CASE("recovery requires spectral mode") {
  DgdSpec spec;
  spec.n_agents = 2;
  spec.n_iters = 1;
  spec.mode = MatrixMode::Exact;
  spec.matrix = w1_matrix(2, 0.5);
  DgdBuild b = build_dgd(spec);
  PepSolution s = solve_pep(b.problem);
  REQUIRE(s.sdp.status == SolveStatus::Optimal);
  ReconstructedInstance inst = factor_gram(s.gram, s.fvals, 1e-7);
  CHECK_THROWS_AS(estimate_worst_matrix(inst, b, spec), std::invalid_argument);
}

TEST_CASE("doubly stochastic projection") {
  Eigen::MatrixXd m(2, 2);
  m << 0.3, 0.8, 0.6, 0.1;
  ExplicitMatrix proj = project_generalized_doubly_stochastic({m});
  CHECK((proj.entries - proj.entries.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((proj.entries.rowwise().sum() - Eigen::VectorXd::Ones(2)).cwiseAbs().maxCoeff() <=
        1e-14);
  // already-stochastic symmetric input is a fixed point
  ExplicitMatrix w = w1_matrix(3, 0.4);
  ExplicitMatrix same = project_generalized_doubly_stochastic(w);
  CHECK((same.entries - w.entries).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("instance CSV dump shape") {
  ReconstructedInstance inst;
  inst.dimension = 2;
  inst.coords = Eigen::MatrixXd::Ones(2, 3);
  inst.fvals = Eigen::VectorXd::Ones(2);
  std::ostringstream os;
  dump_instance_csv(inst, os);
  int lines = 0;
  std::istringstream is(os.str());
  std::string l;
  while (std::getline(is, l)) ++lines;
  CHECK(lines == 1 + 3 + 2);  // header + points + fvals
}
