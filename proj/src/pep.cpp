#include "decpep/pep.hpp"

#include <stdexcept>

namespace decpep {

ScalarExpr inner(const VectorExpr& u, const VectorExpr& v) {
  ScalarExpr out;
  for (const auto& [p, cu] : u.coeffs())
    for (const auto& [q, cv] : v.coeffs()) out.add_gram(p, q, cu * cv);
  return out;
}

Point PepProblem::add_point() { return Point{num_points_++}; }

FValue PepProblem::add_fvalue() { return FValue{num_fvalues_++}; }

void PepProblem::check_expr(const ScalarExpr& e) const {
  for (const auto& [k, c] : e.gram_coeffs()) {
    (void)c;
    if (k.first < 0 || k.second >= num_points_)
      throw std::out_of_range("expression references unregistered point");
  }
  for (const auto& [k, c] : e.f_coeffs()) {
    (void)c;
    if (k < 0 || k >= num_fvalues_)
      throw std::out_of_range("expression references unregistered f-value");
  }
}

void PepProblem::add_eq(ScalarExpr expr) {
  check_expr(expr);
  eqs_.push_back(std::move(expr));
}

void PepProblem::add_ineq(ScalarExpr expr) {
  check_expr(expr);
  ineqs_.push_back(std::move(expr));
}

void PepProblem::add_lmi(std::vector<std::vector<ScalarExpr>> block) {
  const size_t k = block.size();
  if (k == 0) throw std::invalid_argument("empty LMI block");
  for (const auto& row : block) {
    if (row.size() != k) throw std::invalid_argument("LMI block must be square");
    for (const auto& e : row) check_expr(e);
  }
  lmis_.push_back(std::move(block));
}

void PepProblem::add_linear_vector_equality(const VectorExpr& u, const VectorExpr& v) {
  const VectorExpr d = u - v;
  add_eq(inner(d, d));
  for (int p = 0; p < num_points_; ++p) add_eq(inner(d, VectorExpr(Point{p})));
}

void PepProblem::set_objective(ScalarExpr expr) {
  check_expr(expr);
  objective_ = std::move(expr);
}

namespace {

// Gram coefficient c on the unordered pair {p,q} maps to the symmetric
// matrix entry c (diagonal) or c/2 (off-diagonal), so that tr(A G)
// reproduces the functional.
void lower_expr(const ScalarExpr& e, LinearFunctional& out) {
  for (const auto& [k, c] : e.gram_coeffs())
    out.blocks.push_back({0, k.first, k.second, k.first == k.second ? c : 0.5 * c});
  for (const auto& [k, c] : e.f_coeffs()) out.free_vars.push_back({k, c});
}

}  // namespace

SdpProblem PepProblem::compile() const {
  SdpProblem sdp;
  sdp.psd_blocks.push_back({0, std::max(num_points_, 1)});
  sdp.num_free = num_fvalues_;

  lower_expr(objective_, sdp.objective);
  sdp.objective_offset = objective_.constant();

  for (const ScalarExpr& e : eqs_) {
    AffineConstraint c;
    lower_expr(e, c.lhs);
    c.rhs = -e.constant();
    sdp.eq_constraints.push_back(std::move(c));
  }
  for (const ScalarExpr& e : ineqs_) {
    AffineConstraint c;
    lower_expr(e, c.lhs);
    c.rhs = -e.constant();
    sdp.ineq_constraints.push_back(std::move(c));
  }

  // Each LMI block becomes a PSD slack block B with B_ij = S_ij(G, f).
  for (size_t l = 0; l < lmis_.size(); ++l) {
    const auto& S = lmis_[l];
    const int dim = static_cast<int>(S.size());
    const int bid = 1 + static_cast<int>(l);
    sdp.psd_blocks.push_back({bid, dim});
    for (int i = 0; i < dim; ++i) {
      for (int j = i; j < dim; ++j) {
        ScalarExpr e = 0.5 * (S[i][j] + S[j][i]);
        AffineConstraint c;
        c.lhs.blocks.push_back({bid, i, j, i == j ? 1.0 : 0.5});
        LinearFunctional neg;
        lower_expr(e, neg);
        for (BlockCoeff bc : neg.blocks) {
          bc.value = -bc.value;
          c.lhs.blocks.push_back(bc);
        }
        for (FreeCoeff fc : neg.free_vars) {
          fc.value = -fc.value;
          c.lhs.free_vars.push_back(fc);
        }
        c.rhs = e.constant();
        sdp.eq_constraints.push_back(std::move(c));
      }
    }
  }
  return sdp;
}

PepSolution solve_pep(const PepProblem& problem, const SolverSettings& settings) {
  SdpProblem sdp = problem.compile();
  PepSolution out;
  out.sdp = solve(sdp, settings);
  out.worst_case_value = out.sdp.objective_value;
  if (!out.sdp.block_values.empty()) out.gram = out.sdp.block_values[0];
  out.fvals = out.sdp.free_values;
  return out;
}

double evaluate(const ScalarExpr& expr, const Eigen::MatrixXd& gram,
                const Eigen::VectorXd& fvals) {
  double acc = expr.constant();
  for (const auto& [k, c] : expr.gram_coeffs()) acc += c * gram(k.first, k.second);
  for (const auto& [k, c] : expr.f_coeffs()) acc += c * fvals(k);
  return acc;
}

}  // namespace decpep
