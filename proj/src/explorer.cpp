#include "decpep/explorer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace decpep {

ExplicitMatrix metropolis_weights(const Eigen::MatrixXi& adjacency) {
  const int n = static_cast<int>(adjacency.rows());
  if (adjacency.cols() != n)
    throw std::invalid_argument("metropolis_weights: adjacency must be square");
  for (int i = 0; i < n; ++i) {
    if (adjacency(i, i) != 0)
      throw std::invalid_argument("metropolis_weights: nonzero diagonal");
    for (int j = 0; j < n; ++j) {
      if (adjacency(i, j) != adjacency(j, i))
        throw std::invalid_argument("metropolis_weights: adjacency not symmetric");
      if (adjacency(i, j) != 0 && adjacency(i, j) != 1)
        throw std::invalid_argument("metropolis_weights: entries must be 0/1");
    }
  }
  // connectivity (BFS)
  std::vector<int> seen(n, 0), queue{0};
  seen[0] = 1;
  for (size_t q = 0; q < queue.size(); ++q)
    for (int j = 0; j < n; ++j)
      if (adjacency(queue[q], j) && !seen[j]) {
        seen[j] = 1;
        queue.push_back(j);
      }
  if (std::accumulate(seen.begin(), seen.end(), 0) != n)
    throw std::invalid_argument("metropolis_weights: graph is disconnected");

  Eigen::VectorXi deg = adjacency.rowwise().sum();
  ExplicitMatrix w;
  w.entries = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i == j || !adjacency(i, j)) continue;
      w.entries(i, j) = 1.0 / (1.0 + std::max(deg(i), deg(j)));
      off += w.entries(i, j);
    }
    w.entries(i, i) = 1.0 - off;
  }
  return w;
}

Eigen::MatrixXi grid_adjacency(int rows, int cols) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("grid dimensions must be >= 1");
  const int n = rows * cols;
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(n, n);
  auto id = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (r + 1 < rows) a(id(r, c), id(r + 1, c)) = a(id(r + 1, c), id(r, c)) = 1;
      if (c + 1 < cols) a(id(r, c), id(r, c + 1)) = a(id(r, c + 1), id(r, c)) = 1;
    }
  return a;
}

Eigen::MatrixXi load_adjacency_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open edge-list file: " + path);
  int n = 0;
  if (!(f >> n) || n < 1)
    throw std::runtime_error("edge-list file: first token must be the vertex count");
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(n, n);
  int i, j;
  while (f >> i >> j) {
    if (i < 0 || j < 0 || i >= n || j >= n || i == j)
      throw std::runtime_error("edge-list file: bad edge " + std::to_string(i) + " " +
                               std::to_string(j));
    a(i, j) = a(j, i) = 1;
  }
  if (!f.eof()) throw std::runtime_error("edge-list file: unparsable trailing data");
  return a;
}

ExplicitMatrix random_sym_doubly_stochastic(int n, uint64_t seed) {
  if (n < 2) throw std::invalid_argument("random_sym_doubly_stochastic requires N >= 2");
  std::mt19937_64 rng(seed);
  double factorial = 1.0;
  for (int i = 2; i <= n && factorial <= 20.0; ++i) factorial *= i;
  const int n_perm = static_cast<int>(std::min(factorial, 20.0));

  // Dirichlet(1) weights via normalized exponentials.
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> wts(n_perm);
  double total = 0.0;
  for (double& w : wts) {
    w = expo(rng);
    total += w;
  }

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  std::vector<int> perm(n);
  for (int p = 0; p < n_perm; ++p) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int i = 0; i < n; ++i) m(i, perm[i]) += wts[p] / total;
  }
  ExplicitMatrix w;
  w.entries = 0.5 * (m + m.transpose());
  return w;
}

SearchResult random_search(const DgdSpec& base, double lam, int n_samples,
                           uint64_t seed, const SolverSettings& settings) {
  if (!(lam >= 0.0 && lam < 1.0))
    throw std::invalid_argument("random_search requires lam in [0, 1)");
  if (n_samples < 0) throw std::invalid_argument("n_samples must be >= 0");

  const SpectralClass cls = SpectralClass::symmetric(lam);
  SearchResult res;
  for (int s = 0; s < n_samples; ++s) {
    SearchRow row;
    row.sample = s;
    row.seed = seed + static_cast<uint64_t>(s);
    ExplicitMatrix w = random_sym_doubly_stochastic(base.n_agents, row.seed);
    MembershipReport rep = membership_check(w, cls, 1e-12);
    row.lambda2 = 0.0;
    for (int i = 1; i < rep.spectrum.size(); ++i)
      row.lambda2 = std::max(row.lambda2, std::abs(rep.spectrum(i)));
    row.accepted = rep.member;
    if (row.accepted) {
      DgdSpec spec = base;
      spec.mode = MatrixMode::Exact;
      spec.matrix = w;
      PepSolution sol = worst_case(spec, settings);
      row.status = sol.sdp.status;
      row.value = sol.worst_case_value;
      ++res.n_accepted;
      if (row.status == SolveStatus::Optimal &&
          (!res.best_matrix || row.value > res.best_value)) {
        res.best_value = row.value;
        res.best_matrix = w;
      }
    }
    res.rows.push_back(std::move(row));
  }
  return res;
}

const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::Lambda: return "lambda";
    case SweepAxis::NAgents: return "n_agents";
    case SweepAxis::NIters: return "n_iters";
    case SweepAxis::StepSize: return "step_size";
  }
  return "unknown";
}

SweepAxis parse_axis(const std::string& s) {
  if (s == "lambda") return SweepAxis::Lambda;
  if (s == "n_agents") return SweepAxis::NAgents;
  if (s == "n_iters") return SweepAxis::NIters;
  if (s == "step_size") return SweepAxis::StepSize;
  throw std::invalid_argument("unknown sweep axis: " + s);
}

DgdSpec apply_axis(const DgdSpec& base, SweepAxis axis, double value) {
  DgdSpec spec = base;
  switch (axis) {
    case SweepAxis::Lambda:
      if (spec.mode != MatrixMode::Spectral)
        throw std::invalid_argument("lambda sweep requires spectral mode");
      spec.cls = SpectralClass::symmetric(value);
      break;
    case SweepAxis::NAgents:
      if (spec.mode != MatrixMode::Spectral)
        throw std::invalid_argument("n_agents sweep requires spectral mode");
      if (value != std::floor(value))
        throw std::invalid_argument("n_agents values must be integers");
      spec.n_agents = static_cast<int>(value);
      break;
    case SweepAxis::NIters:
      if (value != std::floor(value))
        throw std::invalid_argument("n_iters values must be integers");
      spec.n_iters = static_cast<int>(value);
      break;
    case SweepAxis::StepSize:
      spec.step_size = value;
      spec.h = 0.0;
      break;
  }
  spec.validate();
  return spec;
}

namespace {

bool theory_applies(const DgdSpec& spec) {
  if (spec.mode != MatrixMode::Spectral) return false;
  if (spec.cls.lam_minus != -spec.cls.lam_plus) return false;
  const double lam = spec.cls.lam_plus;
  if (!(lam >= 0.0 && lam < 1.0)) return false;
  const double a0 = 1.0 / std::sqrt(static_cast<double>(spec.n_iters));
  return std::abs(spec.alpha() - a0) <= 1e-12 * a0;
}

SweepRow run_row(const SweepGrid& grid, double value, const SolverSettings& settings) {
  SweepRow row;
  row.axis_value = value;
  try {
    DgdSpec spec = apply_axis(grid.base, grid.axis, value);
    PepSolution sol = worst_case(spec, settings);
    row.status = sol.sdp.status;
    row.worst_case = sol.worst_case_value;
    row.solve_seconds = sol.sdp.solve_seconds;
    if (theory_applies(spec))
      row.theory = theory_bound(spec.n_iters, spec.cls.lam_plus, spec.radius,
                                spec.bound);
    if (row.status != SolveStatus::Optimal) row.error = to_string(row.status);
  } catch (const std::exception& ex) {
    row.error = ex.what();
  }
  return row;
}

}  // namespace

std::vector<SweepRow> sweep(const SweepGrid& grid, const SolverSettings& settings,
                            int jobs) {
  if (grid.values.empty()) throw std::invalid_argument("sweep grid has no values");
  std::vector<SweepRow> rows(grid.values.size());
  if (jobs <= 1) {
    for (size_t i = 0; i < grid.values.size(); ++i)
      rows[i] = run_row(grid, grid.values[i], settings);
    return rows;
  }
  std::vector<std::future<SweepRow>> futs(grid.values.size());
  size_t next = 0;
  while (next < grid.values.size()) {
    const size_t batch = std::min<size_t>(jobs, grid.values.size() - next);
    for (size_t b = 0; b < batch; ++b) {
      const double v = grid.values[next + b];
      futs[next + b] = std::async(std::launch::async,
                                  [&grid, v, &settings] { return run_row(grid, v, settings); });
    }
    for (size_t b = 0; b < batch; ++b) rows[next + b] = futs[next + b].get();
    next += batch;
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, SweepAxis axis,
                     std::ostream& os) {
  os << to_string(axis) << ",worst_case,theory_bound,status,solve_seconds,error\n";
  char buf[64];
  for (const SweepRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.axis_value);
    os << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.worst_case);
    os << buf << ',';
    if (r.theory) {
      std::snprintf(buf, sizeof buf, "%.17g", *r.theory);
      os << buf;
    }
    os << ',' << to_string(r.status) << ',';
    std::snprintf(buf, sizeof buf, "%.3f", r.solve_seconds);
    os << buf << ',' << r.error << "\n";
  }
}

void write_search_csv(const SearchResult& result, std::ostream& os) {
  os << "sample,seed,accepted,lambda2,value,status\n";
  char buf[64];
  for (const SearchRow& r : result.rows) {
    os << r.sample << ',' << r.seed << ',' << (r.accepted ? 1 : 0) << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.lambda2);
    os << buf << ',';
    if (r.accepted) {
      std::snprintf(buf, sizeof buf, "%.17g", r.value);
      os << buf << ',' << to_string(r.status);
    } else {
      os << ',';
    }
    os << "\n";
  }
}

}  // namespace decpep
