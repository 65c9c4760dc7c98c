#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace decpep {

/// Semidefinite programs in the form used throughout this project:
///
///   maximize   sum_b <C_b, X_b> + e'u + offset
///   subject to sum_b <A_ib, X_b> + d_i'u  =  b_i   (equalities)
///              sum_b <A_jb, X_b> + d_j'u  <= b_j   (inequalities)
///              X_b PSD for every block b, u free.
///
/// Coefficients address the upper triangle of each symmetric block
/// (row <= col); an off-diagonal value v stands for the symmetric matrix
/// with v at (row,col) and (col,row), so its contribution to the
/// functional is 2*v*X(row,col).
struct PsdBlock {
  int id = 0;
  int dim = 0;
};

struct BlockCoeff {
  int block_id = 0;
  int row = 0;
  int col = 0;  // row <= col
  double value = 0.0;
};

struct FreeCoeff {
  int index = 0;
  double value = 0.0;
};

struct LinearFunctional {
  std::vector<BlockCoeff> blocks;
  std::vector<FreeCoeff> free_vars;
};

struct AffineConstraint {
  LinearFunctional lhs;
  double rhs = 0.0;
};

struct SdpProblem {
  std::vector<PsdBlock> psd_blocks;
  int num_free = 0;
  LinearFunctional objective;  // sense: maximize
  double objective_offset = 0.0;
  std::vector<AffineConstraint> eq_constraints;
  std::vector<AffineConstraint> ineq_constraints;  // lhs <= rhs

  /// Throws std::invalid_argument on malformed data (bad dimensions,
  /// duplicate block ids, out-of-range coefficients).
  void validate() const;
};

enum class SolveStatus {
  Optimal,
  PrimalInfeasible,
  DualInfeasible,
  NumericalLimit,
};

const char* to_string(SolveStatus s);

struct SdpSolution {
  SolveStatus status = SolveStatus::NumericalLimit;
  double objective_value = 0.0;
  /// Aligned with SdpProblem::psd_blocks.
  std::vector<Eigen::MatrixXd> block_values;
  Eigen::VectorXd free_values;
  /// Multipliers, equality constraints first, then inequalities.
  Eigen::VectorXd dual_values;
  /// Relative duality gap |p - d| / max(1, |p|, |d|).
  double gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  double solve_seconds = 0.0;
};

struct SolverSettings {
  double gap_tol = 1e-6;
  double feas_tol = 1e-8;
  int max_iters = 200;
  bool verbose = false;

  void validate() const;  // tolerances must be positive
};

/// Solves the SDP with a homogeneous self-dual primal-dual interior-point
/// method (HKM direction, Mehrotra predictor-corrector). Deterministic:
/// identical inputs give identical outputs.
SdpSolution solve(const SdpProblem& problem, const SolverSettings& settings = {});

struct ResidualReport {
  double primal_feas = 0.0;  // max violation of eq/ineq constraints and block PSD-ness
  double dual_feas = 0.0;    // dual cone + free-var stationarity violation
  double gap = 0.0;          // |primal objective - dual objective|
};

/// Evaluates feasibility of a candidate solution against the problem data.
/// Pure function; throws std::invalid_argument on dimension mismatch.
ResidualReport residuals(const SdpProblem& problem, const SdpSolution& candidate);

/// Plain-text sparse dump, one coefficient per line:
///   constraint-id block-id row col value
/// constraint-id 0 is the objective; 1..m_eq the equalities; then the
/// inequalities. block-id >= 0 addresses a PSD block entry, -1 a free
/// variable (index in `row`, col 0), -2 the right-hand side (or objective
/// offset). Header lines start with '#'.
void dump_problem(const SdpProblem& problem, std::ostream& os);

}  // namespace decpep
