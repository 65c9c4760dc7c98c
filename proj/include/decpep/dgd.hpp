#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "decpep/consensus.hpp"
#include "decpep/functions.hpp"
#include "decpep/pep.hpp"

namespace decpep {

enum class MatrixMode { Exact, Spectral };

enum class PerfMeasure {
  FGapAveragedIterate,  // f(x_av) - f(x*), x_av averaged over agents and iterations
  FGapLastIterateMean,  // f(mean_i x_i^K) - f(x*)
  ConsensusError,       // (1/N) sum_i ||x_i^K - mean_j x_j^K||^2
};

const char* to_string(PerfMeasure m);
const char* to_string(MatrixMode m);

/// Problem data for K iterations of decentralized subgradient descent on
/// N agents holding convex functions with subgradients bounded by B,
/// identical start within distance R of the minimizer.
struct DgdSpec {
  int n_agents = 3;
  int n_iters = 10;
  double step_size = 0.0;  // alpha; 0 means derived from h
  double h = 0.0;          // alpha = h / sqrt(K); 0 means derived from alpha
  double radius = 1.0;     // R
  double bound = 1.0;      // B
  MatrixMode mode = MatrixMode::Spectral;
  SpectralClass cls = SpectralClass::symmetric(0.5);
  ExplicitMatrix matrix;   // exact mode only
  PerfMeasure measure = PerfMeasure::FGapAveragedIterate;

  /// Resolved step size. Defaults to 1/sqrt(K) when neither field is set.
  double alpha() const;
  void validate() const;  // throws std::invalid_argument
};

/// The symbolic DGD problem plus handles into it, for recovery and tests.
struct DgdBuild {
  PepProblem problem;
  Point x0;
  std::vector<LocalFunction> functions;
  /// iterates[i][k], k = 0..K.
  std::vector<std::vector<VectorExpr>> iterates;
  /// Consensus inputs/outputs per step: cons_in[k][i] = x_i^k.
  std::vector<std::vector<VectorExpr>> cons_in;
  std::vector<std::vector<VectorExpr>> cons_out;
  VectorExpr x_eval;  // evaluation point of the gap measures
  std::vector<Triplet> at_eval;
  std::vector<Triplet> at_star;
};

DgdBuild build_dgd(const DgdSpec& spec);

PepSolution worst_case(const DgdSpec& spec, const SolverSettings& settings = {});

/// (R^2 + B^2) / (2 sqrt(K)) + 2 B^2 / (sqrt(K) (1 - lam)); valid for the
/// step size 1/sqrt(K). Throws std::invalid_argument unless lam in [0, 1).
double theory_bound(int n_iters, double lam, double radius = 1.0, double bound = 1.0);

/// R B ((1/h + h) / (2 sqrt(K)) + 2 h / (sqrt(K) (1 - lam))); reduces to
/// theory_bound at h = B/R with R = B = 1.
double scaled_theory_bound(int n_iters, double lam, double radius, double bound,
                           double h);

/// Worst case at (R, B) from the solved unit problem: R * B * w(1, 1, h).
double scale_worst_case(double w_unit, double radius, double bound);

/// Key-value config file (one `key value` or `key = value` pair per line,
/// '#' comments). Keys: n_agents, n_iters, step_size, h, radius, bound,
/// mode (exact|spectral), lambda, lambda_minus, lambda_plus, matrix_file,
/// measure (avg|last-mean|consensus).
DgdSpec load_spec(std::istream& is, const std::string& base_dir = "");
DgdSpec load_spec_file(const std::string& path);

PerfMeasure parse_measure(const std::string& s);

}  // namespace decpep
