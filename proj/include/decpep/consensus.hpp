#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "decpep/expressions.hpp"
#include "decpep/pep.hpp"

namespace decpep {

/// The class W(lam_minus, lam_plus): real symmetric generalized doubly
/// stochastic matrices whose eigenvalues other than lambda_1 = 1 lie in
/// [lam_minus, lam_plus].
struct SpectralClass {
  double lam_minus = -1.0;
  double lam_plus = 1.0;

  SpectralClass() = default;
  SpectralClass(double lm, double lp);
  /// The symmetric range [-lam, lam] used throughout the DGD study.
  static SpectralClass symmetric(double lam) { return {-lam, lam}; }

  double beta() const;  // max(|lam_minus|, |lam_plus|)
};

/// A concrete communication matrix.
struct ExplicitMatrix {
  Eigen::MatrixXd entries;

  int size() const { return static_cast<int>(entries.rows()); }
};

/// Reads the matrix file format: first line N, then N rows of N reals,
/// whitespace separated. Files whose first data line is not a bare
/// integer are parsed as CSV (one row per line). Throws std::runtime_error
/// with diagnostics on malformed input.
ExplicitMatrix load_matrix(std::istream& is);
ExplicitMatrix load_matrix_file(const std::string& path);
void save_matrix(const ExplicitMatrix& w, std::ostream& os);
void save_matrix_file(const ExplicitMatrix& w, const std::string& path);

struct MembershipReport {
  double max_asymmetry = 0.0;
  double max_row_sum_dev = 0.0;  // deviation of row sums from 1
  double max_col_sum_dev = 0.0;
  Eigen::VectorXd spectrum;      // sorted descending
  double min_entry = 0.0;
  bool nonnegative = false;      // entrywise, within tol
  bool lambda1_is_one = false;
  bool eigs_in_range = false;
  bool member = false;
};

/// Report-only check of membership in W(lam_minus, lam_plus).
MembershipReport membership_check(const ExplicitMatrix& w, const SpectralClass& cls,
                                  double tol = 1e-9);

/// y_i = sum_j w_ij x_j as derived expressions; adds nothing to the
/// problem, works for arbitrary square W. Throws on dimension mismatch.
std::vector<VectorExpr> exact_consensus(const ExplicitMatrix& w,
                                        const std::vector<VectorExpr>& x_cols);

/// One consensus step: N inputs, N outputs (fresh points in spectral mode).
struct ConsensusStep {
  std::vector<VectorExpr> x_cols;
  std::vector<VectorExpr> y_cols;
};

/// K consensus steps sharing one (unknown) matrix from a spectral class.
struct ConsensusBlock {
  int n_agents = 0;
  std::vector<ConsensusStep> steps;
  SpectralClass cls;
};

/// Emits the spectral relaxation of y = Wx for W in the class:
/// per-step agent-average equalities, symmetry of the centered cross-Gram
/// matrix, and three KxK LMI blocks bounding the centered spectrum.
void spectral_consensus(const ConsensusBlock& block, PepProblem& problem);

}  // namespace decpep
