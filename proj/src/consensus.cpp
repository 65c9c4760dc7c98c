#include "decpep/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace decpep {

SpectralClass::SpectralClass(double lm, double lp) : lam_minus(lm), lam_plus(lp) {
  if (!(lm <= lp)) throw std::invalid_argument("spectral range requires lam_minus <= lam_plus");
  if (lm < -1.0 || lp > 1.0)
    throw std::invalid_argument("spectral range must lie within [-1, 1]");
}

double SpectralClass::beta() const {
  return std::max(std::abs(lam_minus), std::abs(lam_plus));
}

namespace {

std::vector<std::string> data_lines(std::istream& is) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    const auto pos = line.find('#');
    if (pos != std::string::npos) line.erase(pos);
    if (line.find_first_not_of(" \t\r\n,") == std::string::npos) continue;
    lines.push_back(line);
  }
  return lines;
}

std::vector<double> parse_row(const std::string& line, int lineno) {
  std::string cleaned = line;
  std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
  std::istringstream ss(cleaned);
  std::vector<double> vals;
  double v;
  while (ss >> v) vals.push_back(v);
  std::string rest;
  if (ss.clear(), ss >> rest)
    throw std::runtime_error("matrix file: unparsable token on line " +
                             std::to_string(lineno));
  return vals;
}

}  // namespace

ExplicitMatrix load_matrix(std::istream& is) {
  const auto lines = data_lines(is);
  if (lines.empty()) throw std::runtime_error("matrix file: no data");

  size_t first_row = 0;
  int n = -1;
  {
    const auto head = parse_row(lines[0], 1);
    if (head.size() == 1 && head[0] == std::floor(head[0]) && head[0] >= 1 &&
        head[0] < 10000) {
      n = static_cast<int>(head[0]);
      first_row = 1;
    }
  }
  if (n < 0) n = static_cast<int>(lines.size());  // CSV style: rows define N

  if (lines.size() - first_row != static_cast<size_t>(n))
    throw std::runtime_error("matrix file: expected " + std::to_string(n) +
                             " rows, found " +
                             std::to_string(lines.size() - first_row));
  ExplicitMatrix w;
  w.entries.resize(n, n);
  for (int i = 0; i < n; ++i) {
    const auto row = parse_row(lines[first_row + i], static_cast<int>(first_row) + i + 1);
    if (static_cast<int>(row.size()) != n)
      throw std::runtime_error("matrix file: row " + std::to_string(i + 1) + " has " +
                               std::to_string(row.size()) + " entries, expected " +
                               std::to_string(n));
    for (int j = 0; j < n; ++j) w.entries(i, j) = row[j];
  }
  return w;
}

ExplicitMatrix load_matrix_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open matrix file: " + path);
  return load_matrix(f);
}

void save_matrix(const ExplicitMatrix& w, std::ostream& os) {
  const int n = w.size();
  os << n << "\n";
  char buf[64];
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", w.entries(i, j));
      os << buf << (j + 1 == n ? "\n" : " ");
    }
  }
}

void save_matrix_file(const ExplicitMatrix& w, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write matrix file: " + path);
  save_matrix(w, f);
}

MembershipReport membership_check(const ExplicitMatrix& w, const SpectralClass& cls,
                                  double tol) {
  if (w.entries.rows() != w.entries.cols())
    throw std::invalid_argument("membership_check: matrix must be square");
  const int n = w.size();
  MembershipReport rep;
  rep.max_asymmetry = (w.entries - w.entries.transpose()).cwiseAbs().maxCoeff();
  rep.max_row_sum_dev =
      (w.entries.rowwise().sum() - Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff();
  rep.max_col_sum_dev =
      (w.entries.colwise().sum().transpose() - Eigen::VectorXd::Ones(n))
          .cwiseAbs()
          .maxCoeff();
  rep.min_entry = w.entries.minCoeff();
  rep.nonnegative = rep.min_entry >= -tol;

  Eigen::MatrixXd sym = 0.5 * (w.entries + w.entries.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  rep.spectrum = es.eigenvalues().reverse();  // descending

  rep.lambda1_is_one = std::abs(rep.spectrum(0) - 1.0) <= tol;
  rep.eigs_in_range = true;
  for (int i = 1; i < n; ++i) {
    if (rep.spectrum(i) < cls.lam_minus - tol || rep.spectrum(i) > cls.lam_plus + tol)
      rep.eigs_in_range = false;
  }
  if (n == 1) rep.eigs_in_range = true;
  rep.member = rep.max_asymmetry <= tol && rep.max_row_sum_dev <= tol &&
               rep.max_col_sum_dev <= tol && rep.lambda1_is_one && rep.eigs_in_range;
  return rep;
}

std::vector<VectorExpr> exact_consensus(const ExplicitMatrix& w,
                                        const std::vector<VectorExpr>& x_cols) {
  if (w.entries.rows() != w.entries.cols())
    throw std::invalid_argument("exact_consensus: matrix must be square");
  const int n = w.size();
  if (static_cast<int>(x_cols.size()) != n)
    throw std::invalid_argument("exact_consensus: expected " + std::to_string(n) +
                                " input columns");
  std::vector<VectorExpr> y(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (w.entries(i, j) != 0.0) y[i] += w.entries(i, j) * x_cols[j];
  return y;
}

void spectral_consensus(const ConsensusBlock& block, PepProblem& problem) {
  const int n = block.n_agents;
  const int k = static_cast<int>(block.steps.size());
  for (const ConsensusStep& s : block.steps) {
    if (static_cast<int>(s.x_cols.size()) != n ||
        static_cast<int>(s.y_cols.size()) != n)
      throw std::invalid_argument("spectral_consensus: step size mismatch");
  }

  // Centered columns; centering is affine, no new points.
  std::vector<std::vector<VectorExpr>> xt(k), yt(k);
  for (int s = 0; s < k; ++s) {
    VectorExpr xbar, ybar;
    for (int i = 0; i < n; ++i) {
      xbar += block.steps[s].x_cols[i];
      ybar += block.steps[s].y_cols[i];
    }
    xbar *= 1.0 / n;
    ybar *= 1.0 / n;
    problem.add_linear_vector_equality(xbar, ybar);
    xt[s].resize(n);
    yt[s].resize(n);
    for (int i = 0; i < n; ++i) {
      xt[s][i] = block.steps[s].x_cols[i] - xbar;
      yt[s][i] = block.steps[s].y_cols[i] - ybar;
    }
  }

  // Entries of the KxK matrices sum scalar products over agents (and,
  // implicitly, over dimensions).
  auto cross = [&](const std::vector<VectorExpr>& a,
                   const std::vector<VectorExpr>& b) {
    ScalarExpr e;
    for (int i = 0; i < n; ++i) e += inner(a[i], b[i]);
    return e;
  };

  std::vector<std::vector<ScalarExpr>> xtx(k, std::vector<ScalarExpr>(k));
  std::vector<std::vector<ScalarExpr>> xty(k, std::vector<ScalarExpr>(k));
  for (int s = 0; s < k; ++s)
    for (int t = 0; t < k; ++t) {
      xtx[s][t] = cross(xt[s], xt[t]);
      xty[s][t] = cross(xt[s], yt[t]);
    }

  // Symmetry of the centered cross-Gram matrix.
  for (int s = 0; s < k; ++s)
    for (int t = s + 1; t < k; ++t) problem.add_eq(xty[s][t] - xty[t][s]);

  const double lm = block.cls.lam_minus;
  const double lp = block.cls.lam_plus;

  std::vector<std::vector<ScalarExpr>> lo(k, std::vector<ScalarExpr>(k));
  std::vector<std::vector<ScalarExpr>> hi(k, std::vector<ScalarExpr>(k));
  std::vector<std::vector<ScalarExpr>> quad(k, std::vector<ScalarExpr>(k));
  for (int s = 0; s < k; ++s) {
    for (int t = 0; t < k; ++t) {
      lo[s][t] = xty[s][t] - lm * xtx[s][t];
      hi[s][t] = lp * xtx[s][t] - xty[s][t];
      // -(Y~ - lm X~)'(Y~ - lp X~)
      std::vector<VectorExpr> za(n), zb(n);
      for (int i = 0; i < n; ++i) {
        za[i] = yt[s][i] - lm * xt[s][i];
        zb[i] = yt[t][i] - lp * xt[t][i];
      }
      quad[s][t] = -cross(za, zb);
    }
  }
  problem.add_lmi(std::move(lo));
  problem.add_lmi(std::move(hi));
  problem.add_lmi(std::move(quad));
}

}  // namespace decpep
