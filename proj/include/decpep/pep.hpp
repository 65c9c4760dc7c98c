#pragma once

#include <vector>

#include <Eigen/Core>

#include "decpep/expressions.hpp"
#include "decpep/sdp.hpp"

namespace decpep {

/// Performance estimation problem over a Gram matrix of basis points and a
/// vector of function values. Constraints and objective are ScalarExprs;
/// compilation produces an SdpProblem whose principal PSD block is G.
class PepProblem {
 public:
  Point add_point();
  FValue add_fvalue();
  int num_points() const { return num_points_; }
  int num_fvalues() const { return num_fvalues_; }

  /// expr == 0.
  void add_eq(ScalarExpr expr);
  /// expr <= 0.
  void add_ineq(ScalarExpr expr);
  /// Square matrix of expressions constrained positive semidefinite.
  /// Entries are symmetrized at compile time.
  void add_lmi(std::vector<std::vector<ScalarExpr>> block);

  /// Enforces u = v through <u-v, u-v> = 0 together with <u-v, b> = 0 for
  /// every basis point b registered so far. The extended set is redundant
  /// given G PSD but better conditioned under floating point.
  void add_linear_vector_equality(const VectorExpr& u, const VectorExpr& v);

  /// Maximized.
  void set_objective(ScalarExpr expr);

  const std::vector<ScalarExpr>& eq_constraints() const { return eqs_; }
  const std::vector<ScalarExpr>& ineq_constraints() const { return ineqs_; }
  const std::vector<std::vector<std::vector<ScalarExpr>>>& lmi_blocks() const {
    return lmis_;
  }
  const ScalarExpr& objective() const { return objective_; }

  /// Lowers to an SDP: block 0 is G (dim = number of points), one free
  /// scalar per FValue, each LMI block becomes an extra PSD block tied to
  /// affine images of (G, f) by equalities. Throws std::out_of_range on
  /// references to unregistered points or f-values.
  SdpProblem compile() const;

 private:
  void check_expr(const ScalarExpr& e) const;

  int num_points_ = 0;
  int num_fvalues_ = 0;
  std::vector<ScalarExpr> eqs_;
  std::vector<ScalarExpr> ineqs_;
  std::vector<std::vector<std::vector<ScalarExpr>>> lmis_;
  ScalarExpr objective_;
};

struct PepSolution {
  double worst_case_value = 0.0;
  Eigen::MatrixXd gram;
  Eigen::VectorXd fvals;
  SdpSolution sdp;
};

PepSolution solve_pep(const PepProblem& problem, const SolverSettings& settings = {});

/// Value of the expression at a concrete (G, f) pair.
double evaluate(const ScalarExpr& expr, const Eigen::MatrixXd& gram,
                const Eigen::VectorXd& fvals);

}  // namespace decpep
