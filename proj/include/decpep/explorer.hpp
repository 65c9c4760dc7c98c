#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "decpep/consensus.hpp"
#include "decpep/dgd.hpp"

namespace decpep {

/// Metropolis weights on an undirected graph: w_ij = 1/(1 + max(deg_i,
/// deg_j)) on edges, diagonal absorbing the remainder. The adjacency must
/// be symmetric 0/1 with zero diagonal and connected; throws otherwise.
ExplicitMatrix metropolis_weights(const Eigen::MatrixXi& adjacency);

/// Adjacency of an r x c grid graph.
Eigen::MatrixXi grid_adjacency(int rows, int cols);

/// Edge-list file: first line N, then one `i j` pair per line (0-based).
Eigen::MatrixXi load_adjacency_file(const std::string& path);

/// Random symmetric doubly stochastic matrix: a Dirichlet-weighted convex
/// combination of min(N!, 20) random permutation matrices, symmetrized.
/// Deterministic per seed.
ExplicitMatrix random_sym_doubly_stochastic(int n, uint64_t seed);

struct SearchRow {
  int sample = 0;
  uint64_t seed = 0;
  bool accepted = false;  // spectrum within [-lam, lam]
  double lambda2 = 0.0;   // largest modulus among lambda_2..lambda_N
  double value = 0.0;     // exact worst case, accepted rows only
  SolveStatus status = SolveStatus::NumericalLimit;
};

struct SearchResult {
  std::vector<SearchRow> rows;
  std::optional<ExplicitMatrix> best_matrix;
  double best_value = 0.0;
  int n_accepted = 0;
};

/// Random search for the worst symmetric doubly stochastic matrix with
/// spectrum in [-lam, lam]: samples candidates, filters by membership,
/// solves the exact PEP for each survivor. `base` supplies N, K, step and
/// measure; its matrix mode is ignored.
SearchResult random_search(const DgdSpec& base, double lam, int n_samples,
                           uint64_t seed, const SolverSettings& settings = {});

enum class SweepAxis { Lambda, NAgents, NIters, StepSize };

const char* to_string(SweepAxis a);
SweepAxis parse_axis(const std::string& s);

struct SweepGrid {
  SweepAxis axis = SweepAxis::Lambda;
  std::vector<double> values;
  DgdSpec base;
};

struct SweepRow {
  double axis_value = 0.0;
  double worst_case = 0.0;
  std::optional<double> theory;  // absent when lam >= 1 or alpha != 1/sqrt(K)
  SolveStatus status = SolveStatus::NumericalLimit;
  double solve_seconds = 0.0;
  std::string error;  // per-row failure, sweep continues
};

/// One worst-case solve per grid value. `jobs` > 1 runs rows concurrently;
/// results are ordered by the grid regardless.
std::vector<SweepRow> sweep(const SweepGrid& grid, const SolverSettings& settings = {},
                            int jobs = 1);

/// Applies one axis value to a base spec (what sweep does per row).
DgdSpec apply_axis(const DgdSpec& base, SweepAxis axis, double value);

void write_sweep_csv(const std::vector<SweepRow>& rows, SweepAxis axis,
                     std::ostream& os);
void write_search_csv(const SearchResult& result, std::ostream& os);

}  // namespace decpep
