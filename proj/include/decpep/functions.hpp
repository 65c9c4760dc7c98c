#pragma once

#include <string>
#include <vector>

#include "decpep/expressions.hpp"
#include "decpep/pep.hpp"

namespace decpep {

enum class FunctionKind {
  Convex,
  ConvexBoundedSubgradient,  // F_B: convex with subgradient norms <= B
};

struct FunctionClass {
  FunctionKind kind = FunctionKind::ConvexBoundedSubgradient;
  double bound = 1.0;  // B, used only for the bounded kind

  static FunctionClass convex() { return {FunctionKind::Convex, 0.0}; }
  static FunctionClass bounded(double b);
};

struct Triplet {
  VectorExpr x;
  Point g;
  FValue f;
};

/// One agent's local function, discretized as (x, g, f) triplets. Repeated
/// evaluation at the same expression returns the cached triplet.
class LocalFunction {
 public:
  LocalFunction(FunctionClass cls, std::string label)
      : cls_(cls), label_(std::move(label)) {}

  /// Returns the subgradient point and function value at x, creating them
  /// on first use. x itself never becomes a basis point.
  Triplet eval(PepProblem& problem, const VectorExpr& x);

  const std::vector<Triplet>& triplets() const { return triplets_; }
  const FunctionClass& function_class() const { return cls_; }
  const std::string& label() const { return label_; }

  /// Interpolation conditions for the class: for every ordered pair k != l
  ///   f_l - f_k + <g_l, x_k - x_l> <= 0,
  /// plus, for the bounded kind, <g_k, g_k> - B^2 <= 0 per triplet.
  std::vector<ScalarExpr> interpolation_constraints() const;

  /// Emits the constraints into the problem.
  void add_interpolation_constraints(PepProblem& problem) const;

 private:
  FunctionClass cls_;
  std::string label_;
  std::vector<Triplet> triplets_;
};

}  // namespace decpep
