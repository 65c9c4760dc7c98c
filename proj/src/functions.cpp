#include "decpep/functions.hpp"

#include <stdexcept>

namespace decpep {

FunctionClass FunctionClass::bounded(double b) {
  if (!(b > 0.0)) throw std::invalid_argument("subgradient bound must be positive");
  return {FunctionKind::ConvexBoundedSubgradient, b};
}

Triplet LocalFunction::eval(PepProblem& problem, const VectorExpr& x) {
  for (const Triplet& t : triplets_)
    if (t.x == x) return t;
  Triplet t{x, problem.add_point(), problem.add_fvalue()};
  triplets_.push_back(t);
  return t;
}

std::vector<ScalarExpr> LocalFunction::interpolation_constraints() const {
  std::vector<ScalarExpr> out;
  const int m = static_cast<int>(triplets_.size());
  for (int k = 0; k < m; ++k) {
    for (int l = 0; l < m; ++l) {
      if (k == l) continue;
      const Triplet& tk = triplets_[k];
      const Triplet& tl = triplets_[l];
      // f_k >= f_l + <g_l, x_k - x_l>
      ScalarExpr e = ScalarExpr(tl.f) - ScalarExpr(tk.f) +
                     inner(VectorExpr(tl.g), tk.x - tl.x);
      out.push_back(std::move(e));
    }
  }
  if (cls_.kind == FunctionKind::ConvexBoundedSubgradient) {
    for (const Triplet& t : triplets_) {
      VectorExpr g{t.g};
      out.push_back(inner(g, g) - cls_.bound * cls_.bound);
    }
  }
  return out;
}

void LocalFunction::add_interpolation_constraints(PepProblem& problem) const {
  for (ScalarExpr& e : interpolation_constraints()) problem.add_ineq(std::move(e));
}

}  // namespace decpep
