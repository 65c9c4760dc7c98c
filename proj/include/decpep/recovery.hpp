#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "decpep/consensus.hpp"
#include "decpep/dgd.hpp"

namespace decpep {

/// Concrete coordinates recovered from a solved Gram matrix: column p of
/// `coords` (d x num_points) is the point with basis id p, so that
/// coords' * coords reproduces G up to the factorization tolerance.
struct ReconstructedInstance {
  int dimension = 0;
  Eigen::MatrixXd coords;
  Eigen::VectorXd fvals;
};

/// Eigendecomposition-based factorization of a PSD Gram matrix;
/// eigenvalues below rank_tol * lambda_max are truncated to zero. Throws
/// std::invalid_argument when G is indefinite beyond tolerance.
ReconstructedInstance factor_gram(const Eigen::MatrixXd& gram,
                                  const Eigen::VectorXd& fvals,
                                  double rank_tol = 1e-6);

/// Concrete coordinates of a derived expression (a combination of columns
/// of the factor).
Eigen::VectorXd coordinates(const ReconstructedInstance& inst, const VectorExpr& e);

struct RecoveredMatrix {
  ExplicitMatrix what;       // W-hat = Y X^+
  double residual = 0.0;     // ||Y - W X||_F / ||Y||_F
  bool x_rank_deficient = false;
  MembershipReport membership;
};

/// W-hat = Y X^+ from stacked agent-by-samples data matrices, with the
/// fit residual and a membership report against `cls`. Throws
/// std::invalid_argument when X is numerically zero.
RecoveredMatrix estimate_matrix(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                const SpectralClass& cls, double rank_tol = 1e-6);

/// Estimates the communication matrix of a solved spectral DGD instance
/// from its consensus inputs/outputs: the agent-by-(d K) matrices X and Y
/// stack the coordinates of all steps and dimensions, and W-hat = Y X^+
/// with a minimum-norm pseudoinverse. Throws std::invalid_argument when X
/// is numerically zero or the build is not in spectral mode.
RecoveredMatrix estimate_worst_matrix(const ReconstructedInstance& inst,
                                      const DgdBuild& build, const DgdSpec& spec,
                                      double rank_tol = 1e-6);

/// The closed-form worst-case matrix: (1+lam)/N off the diagonal,
/// 1 - (N-1)(1+lam)/N on it; spectrum {1, -lam, ..., -lam}.
ExplicitMatrix w1_matrix(int n_agents, double lam);

/// Minimum-norm least-squares pseudoinverse via SVD with relative
/// truncation of small singular values.
Eigen::MatrixXd pseudoinverse(const Eigen::MatrixXd& a, double rel_tol = 1e-6);

/// Nearest (Frobenius) symmetric matrix with unit row and column sums;
/// used to normalize recovered matrices before comparisons.
ExplicitMatrix project_generalized_doubly_stochastic(const ExplicitMatrix& w);

/// CSV dump of a reconstructed instance: one row per point (id, then d
/// coordinates), then one row per function value.
void dump_instance_csv(const ReconstructedInstance& inst, std::ostream& os);

}  // namespace decpep
