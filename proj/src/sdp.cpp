#include "decpep/sdp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace decpep {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Entry {
  int row = 0;  // row <= col, symmetric-matrix entry value
  int col = 0;
  double value = 0.0;
};

// Cholesky factorization of a positive semidefinite matrix that skips
// pivots falling below a relative threshold. Skipped coordinates behave as
// if the corresponding rows/columns were removed; solves return zero there.
// The skip pattern discovered on the first factorization can be locked and
// reused, with later near-zero pivots clamped instead of skipped.
class PivotCholesky {
 public:
  /// Number of non-skipped pivots that fell below the floor and were
  /// clamped; zero means the factorization is trustworthy.
  int factor(MatrixXd S, double rel_tol, const std::vector<uint8_t>* lock,
             double ridge = 0.0) {
    const int n = static_cast<int>(S.rows());
    L_ = std::move(S);
    skip_.assign(n, 0);
    double dmax = 0.0;
    for (int i = 0; i < n; ++i) dmax = std::max(dmax, L_(i, i));
    if (ridge > 0.0) L_.diagonal().array() += ridge * std::max(dmax, 1.0);
    const double tol = std::max(rel_tol * dmax, 1e-300);
    const double floor_piv = 1e-14 * std::max(dmax, 1.0);
    int clamped = 0;
    const int bs = 64;
    for (int j0 = 0; j0 < n; j0 += bs) {
      const int jb = std::min(bs, n - j0);
      for (int j = j0; j < j0 + jb; ++j) {
        const int w = j - j0;
        if (w > 0) {
          L_.col(j).segment(j, n - j).noalias() -=
              L_.block(j, j0, n - j, w) * L_.row(j).segment(j0, w).transpose();
        }
        double d = L_(j, j);
        const bool skip = lock ? ((*lock)[j] != 0) : (d <= tol);
        if (skip) {
          skip_[j] = 1;
          L_.col(j).segment(j, n - j).setZero();
          L_(j, j) = 1.0;
          continue;
        }
        if (d < floor_piv) {
          d = floor_piv;
          ++clamped;
        }
        d = std::sqrt(d);
        L_(j, j) = d;
        if (j + 1 < n) L_.col(j).segment(j + 1, n - j - 1) /= d;
      }
      const int rest = n - j0 - jb;
      if (rest > 0) {
        L_.bottomRightCorner(rest, rest)
            .selfadjointView<Eigen::Lower>()
            .rankUpdate(L_.block(j0 + jb, j0, rest, jb), -1.0);
      }
    }
    return clamped;
  }

  template <typename Rhs>
  void solve_in_place(Rhs& x) const {
    L_.template triangularView<Eigen::Lower>().solveInPlace(x);
    L_.template triangularView<Eigen::Lower>().transpose().solveInPlace(x);
    for (int i = 0; i < static_cast<int>(skip_.size()); ++i)
      if (skip_[i]) x.row(i).setZero();
  }

  const std::vector<uint8_t>& skipped() const { return skip_; }

 private:
  MatrixXd L_;
  std::vector<uint8_t> skip_;
};

// Constraint data in internal (minimization) form, grouped per PSD block.
struct BlockData {
  int dim = 0;
  MatrixXd chat;                        // objective matrix, min sense
  std::vector<int> row_ids;             // constraint rows touching this block
  std::vector<int> entry_start;         // CSR offsets into `entries`
  std::vector<Entry> entries;
};

struct Internal {
  std::vector<BlockData> blocks;
  int num_free = 0;
  int m = 0;            // kept rows (eq then ineq)
  int n_lin = 0;        // slack count (= kept inequality rows)
  MatrixXd D;           // m x num_free
  VectorXd ehat;        // free objective, min sense
  VectorXd b;
  std::vector<int> slack_of_row;        // -1 for equalities
  std::vector<int> orig_index;          // kept row -> original constraint index
  double nu = 0.0;                      // barrier parameter degree
  double bnorm = 0.0, cnorm = 0.0;
};

struct RowView {
  const LinearFunctional* lhs;
  double rhs;
  bool is_eq;
};

const char* kEmptySupportMsg =
    "constraint has empty support but nonzero right-hand side";

// Assembles internal data; drops identically-zero rows, throws on
// empty-support rows with nonzero rhs, pins unsupported free variables.
// Returns false and fills `out` when presolve alone decides the status.
bool presolve(const SdpProblem& p, Internal& in, SdpSolution& out,
              std::vector<uint8_t>& pinned_free) {
  std::unordered_map<int, int> block_index;
  for (int bi = 0; bi < static_cast<int>(p.psd_blocks.size()); ++bi)
    block_index.emplace(p.psd_blocks[bi].id, bi);

  in.blocks.resize(p.psd_blocks.size());
  for (size_t bi = 0; bi < p.psd_blocks.size(); ++bi) {
    in.blocks[bi].dim = p.psd_blocks[bi].dim;
    in.blocks[bi].chat = MatrixXd::Zero(p.psd_blocks[bi].dim, p.psd_blocks[bi].dim);
  }
  for (const BlockCoeff& c : p.objective.blocks) {
    const int bi = block_index.at(c.block_id);
    in.blocks[bi].chat(c.row, c.col) -= c.value;  // min sense
    if (c.row != c.col) in.blocks[bi].chat(c.col, c.row) -= c.value;
  }
  in.num_free = p.num_free;
  in.ehat = VectorXd::Zero(p.num_free);
  for (const FreeCoeff& c : p.objective.free_vars) in.ehat(c.index) -= c.value;

  std::vector<RowView> rows;
  rows.reserve(p.eq_constraints.size() + p.ineq_constraints.size());
  for (const auto& c : p.eq_constraints) rows.push_back({&c.lhs, c.rhs, true});
  for (const auto& c : p.ineq_constraints) rows.push_back({&c.lhs, c.rhs, false});

  std::vector<uint8_t> free_supported(p.num_free, 0);
  std::vector<int> kept;
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
    bool empty = true;
    for (const BlockCoeff& c : rows[i].lhs->blocks)
      if (c.value != 0.0) { empty = false; break; }
    if (empty)
      for (const FreeCoeff& c : rows[i].lhs->free_vars)
        if (c.value != 0.0) { empty = false; break; }
    if (empty) {
      if (rows[i].rhs != 0.0) throw std::invalid_argument(kEmptySupportMsg);
      continue;
    }
    kept.push_back(i);
    for (const FreeCoeff& c : rows[i].lhs->free_vars)
      if (c.value != 0.0) free_supported[c.index] = 1;
  }

  pinned_free.assign(p.num_free, 0);
  for (int j = 0; j < p.num_free; ++j) {
    if (!free_supported[j]) {
      if (in.ehat(j) != 0.0) {
        // Unconstrained free variable with nonzero cost: unbounded.
        out.status = SolveStatus::DualInfeasible;
        return false;
      }
      pinned_free[j] = 1;
    }
  }

  in.m = static_cast<int>(kept.size());
  in.orig_index = kept;
  in.b = VectorXd::Zero(in.m);
  in.D = MatrixXd::Zero(in.m, p.num_free);
  in.slack_of_row.assign(in.m, -1);
  in.n_lin = 0;

  std::vector<std::vector<std::pair<int, Entry>>> per_block(p.psd_blocks.size());
  for (int r = 0; r < in.m; ++r) {
    const RowView& rv = rows[kept[r]];
    in.b(r) = rv.rhs;
    if (!rv.is_eq) in.slack_of_row[r] = in.n_lin++;
    for (const BlockCoeff& c : rv.lhs->blocks) {
      if (c.value == 0.0) continue;
      per_block[block_index.at(c.block_id)].push_back({r, {c.row, c.col, c.value}});
    }
    for (const FreeCoeff& c : rv.lhs->free_vars) in.D(r, c.index) += c.value;
  }
  for (size_t bi = 0; bi < per_block.size(); ++bi) {
    auto& pb = per_block[bi];
    std::stable_sort(pb.begin(), pb.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    BlockData& bd = in.blocks[bi];
    int prev = -1;
    for (const auto& [r, e] : pb) {
      if (r != prev) {
        bd.row_ids.push_back(r);
        bd.entry_start.push_back(static_cast<int>(bd.entries.size()));
        prev = r;
      }
      bd.entries.push_back(e);
    }
    bd.entry_start.push_back(static_cast<int>(bd.entries.size()));
  }

  in.nu = in.n_lin;
  for (const BlockData& bd : in.blocks) in.nu += bd.dim;
  in.bnorm = in.m ? in.b.cwiseAbs().maxCoeff() : 0.0;
  in.cnorm = 0.0;
  for (const BlockData& bd : in.blocks)
    in.cnorm = std::max(in.cnorm, bd.chat.cwiseAbs().maxCoeff());
  if (p.num_free) in.cnorm = std::max(in.cnorm, in.ehat.cwiseAbs().maxCoeff());
  return true;
}

struct ConeState {
  std::vector<MatrixXd> X, Z;
  VectorXd s, z;  // slack cone
  VectorXd u, y;
  double tau = 1.0, kappa = 1.0;
};

struct ConeDir {
  std::vector<MatrixXd> dX, dZ;
  VectorXd ds, dz;
  VectorXd du, dy;
  double dtau = 0.0, dkappa = 0.0;
};

double inner_cone(const Internal& in, const ConeState& v, const ConeState& w) {
  double acc = v.s.dot(w.z);
  for (size_t b = 0; b < in.blocks.size(); ++b)
    acc += v.X[b].cwiseProduct(w.Z[b]).sum();
  return acc;
}

// Largest step with X + a*dX staying PSD; X must be positive definite.
double max_step_psd(const MatrixXd& X, const MatrixXd& dX) {
  Eigen::LLT<MatrixXd> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  MatrixXd B = llt.matrixL().solve(dX);
  B = llt.matrixL().solve(B.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (B + B.transpose()),
                                             Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  return lmin >= 0.0 ? kInf : -1.0 / lmin;
}

double max_step_vec(const VectorXd& x, const VectorXd& dx) {
  double am = kInf;
  for (int i = 0; i < x.size(); ++i)
    if (dx(i) < 0.0) am = std::min(am, -x(i) / dx(i));
  return am;
}

double pobj_internal(const Internal& in, const ConeState& st) {
  double acc = in.ehat.dot(st.u);
  for (size_t b = 0; b < in.blocks.size(); ++b)
    acc += in.blocks[b].chat.cwiseProduct(st.X[b]).sum();
  return acc;
}

}  // namespace

void SolverSettings::validate() const {
  if (!(gap_tol > 0.0) || !(feas_tol > 0.0))
    throw std::invalid_argument("solver tolerances must be positive");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
}

void SdpProblem::validate() const {
  std::unordered_map<int, int> dims;
  for (const PsdBlock& b : psd_blocks) {
    if (b.dim < 1) throw std::invalid_argument("PSD block dimension must be >= 1");
    if (!dims.emplace(b.id, b.dim).second)
      throw std::invalid_argument("duplicate PSD block id");
  }
  if (num_free < 0) throw std::invalid_argument("num_free must be >= 0");
  auto check_fn = [&](const LinearFunctional& f, const char* where) {
    for (const BlockCoeff& c : f.blocks) {
      auto it = dims.find(c.block_id);
      if (it == dims.end())
        throw std::invalid_argument(std::string(where) + ": unknown block id");
      if (c.row < 0 || c.col < c.row || c.col >= it->second)
        throw std::invalid_argument(std::string(where) + ": entry out of range");
      if (!std::isfinite(c.value))
        throw std::invalid_argument(std::string(where) + ": non-finite coefficient");
    }
    for (const FreeCoeff& c : f.free_vars) {
      if (c.index < 0 || c.index >= num_free)
        throw std::invalid_argument(std::string(where) + ": free index out of range");
      if (!std::isfinite(c.value))
        throw std::invalid_argument(std::string(where) + ": non-finite coefficient");
    }
  };
  check_fn(objective, "objective");
  for (const auto& c : eq_constraints) {
    check_fn(c.lhs, "equality");
    if (!std::isfinite(c.rhs)) throw std::invalid_argument("non-finite rhs");
  }
  for (const auto& c : ineq_constraints) {
    check_fn(c.lhs, "inequality");
    if (!std::isfinite(c.rhs)) throw std::invalid_argument("non-finite rhs");
  }
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::PrimalInfeasible: return "primal_infeasible";
    case SolveStatus::DualInfeasible: return "dual_infeasible";
    case SolveStatus::NumericalLimit: return "numerical_limit";
  }
  return "unknown";
}

SdpSolution solve(const SdpProblem& problem, const SolverSettings& settings) {
  const auto t0 = std::chrono::steady_clock::now();
  problem.validate();
  settings.validate();

  SdpSolution sol;
  sol.block_values.resize(problem.psd_blocks.size());
  for (size_t b = 0; b < problem.psd_blocks.size(); ++b)
    sol.block_values[b] = MatrixXd::Zero(problem.psd_blocks[b].dim,
                                         problem.psd_blocks[b].dim);
  sol.free_values = VectorXd::Zero(problem.num_free);
  sol.dual_values = VectorXd::Zero(problem.eq_constraints.size() +
                                   problem.ineq_constraints.size());

  Internal in;
  std::vector<uint8_t> pinned_free;
  if (!presolve(problem, in, sol, pinned_free)) {
    sol.solve_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
  }

  const int nb = static_cast<int>(in.blocks.size());
  const int m = in.m;
  const int nf = in.num_free;

  ConeState st;
  st.X.resize(nb);
  st.Z.resize(nb);
  for (int b = 0; b < nb; ++b) {
    st.X[b] = MatrixXd::Identity(in.blocks[b].dim, in.blocks[b].dim);
    st.Z[b] = MatrixXd::Identity(in.blocks[b].dim, in.blocks[b].dim);
  }
  st.s = VectorXd::Ones(in.n_lin);
  st.z = VectorXd::Ones(in.n_lin);
  st.u = VectorXd::Zero(nf);
  st.y = VectorXd::Zero(m);

  auto eval_Ax = [&](const std::vector<MatrixXd>& X, const VectorXd& s,
                     const VectorXd& u) {
    VectorXd r = VectorXd::Zero(m);
    if (nf) r.noalias() = in.D * u;
    for (int b = 0; b < nb; ++b) {
      const BlockData& bd = in.blocks[b];
      const MatrixXd& Xb = X[b];
      for (size_t k = 0; k < bd.row_ids.size(); ++k) {
        double acc = 0.0;
        for (int t = bd.entry_start[k]; t < bd.entry_start[k + 1]; ++t) {
          const Entry& e = bd.entries[t];
          acc += (e.row == e.col) ? e.value * Xb(e.row, e.col)
                                  : e.value * (Xb(e.row, e.col) + Xb(e.col, e.row));
        }
        r(bd.row_ids[k]) += acc;
      }
    }
    for (int r2 = 0; r2 < m; ++r2)
      if (in.slack_of_row[r2] >= 0) r(r2) += s(in.slack_of_row[r2]);
    return r;
  };
  auto eval_Aty = [&](const VectorXd& y) {
    std::vector<MatrixXd> out(nb);
    for (int b = 0; b < nb; ++b) {
      out[b] = MatrixXd::Zero(in.blocks[b].dim, in.blocks[b].dim);
      const BlockData& bd = in.blocks[b];
      for (size_t k = 0; k < bd.row_ids.size(); ++k) {
        const double w = y(bd.row_ids[k]);
        if (w == 0.0) continue;
        for (int t = bd.entry_start[k]; t < bd.entry_start[k + 1]; ++t) {
          const Entry& e = bd.entries[t];
          out[b](e.row, e.col) += w * e.value;
          if (e.row != e.col) out[b](e.col, e.row) += w * e.value;
        }
      }
    }
    return out;
  };

  PivotCholesky mchol, schol;
  std::vector<uint8_t> skip_lock;
  bool have_lock = false;

  MatrixXd M(m, m), Msave;
  std::vector<MatrixXd> Zi(nb);
  MatrixXd W;          // M^+ D
  MatrixXd Ssmall;     // D' M^+ D
  VectorXd wlin;       // s_j / z_j

  int tiny_steps = 0;
  const double feas_p_scale = 1.0 + in.bnorm;
  const double feas_d_scale = 1.0 + in.cnorm;

  // Best iterate seen, restored when the iteration degrades or produces
  // non-finite values near the numerical floor.
  ConeState best = st;
  double best_score = kInf;
  int best_iter = 0;

  auto finish = [&](SolveStatus status, const ConeState& cs, int iters) {
    sol.status = status;
    sol.iterations = iters;
    const double tau = cs.tau;
    double pobj_ext = problem.objective_offset;
    if (status == SolveStatus::Optimal) {
      for (int b = 0; b < nb; ++b) sol.block_values[b] = cs.X[b] / tau;
      for (int j = 0; j < nf; ++j) sol.free_values(j) = pinned_free[j] ? 0.0 : cs.u(j) / tau;
      for (int r = 0; r < m; ++r) sol.dual_values(in.orig_index[r]) = -cs.y(r) / tau;
      pobj_ext -= pobj_internal(in, cs) / tau;
      sol.objective_value = pobj_ext;
    } else if (status == SolveStatus::PrimalInfeasible ||
               status == SolveStatus::DualInfeasible) {
      // Certificates: scaled ray in dual_values / block_values.
      for (int b = 0; b < nb; ++b) sol.block_values[b] = cs.X[b];
      for (int r = 0; r < m; ++r) sol.dual_values(in.orig_index[r]) = -cs.y(r);
      sol.objective_value = 0.0;
    } else {
      const double t = tau > 0 ? tau : 1.0;
      for (int b = 0; b < nb; ++b) sol.block_values[b] = cs.X[b] / t;
      for (int j = 0; j < nf; ++j) sol.free_values(j) = pinned_free[j] ? 0.0 : cs.u(j) / t;
      for (int r = 0; r < m; ++r) sol.dual_values(in.orig_index[r]) = -cs.y(r) / t;
      sol.objective_value = problem.objective_offset - pobj_internal(in, cs) / t;
    }
    sol.solve_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  int iter = 0;
  for (; iter < settings.max_iters; ++iter) {
    // --- residuals -------------------------------------------------------
    VectorXd F1 = eval_Ax(st.X, st.s, st.u) - in.b * st.tau;
    std::vector<MatrixXd> Aty = eval_Aty(st.y);
    std::vector<MatrixXd> F2(nb);
    for (int b = 0; b < nb; ++b)
      F2[b] = -Aty[b] + in.blocks[b].chat * st.tau - st.Z[b];
    VectorXd F2lin(in.n_lin);
    for (int r = 0; r < m; ++r)
      if (in.slack_of_row[r] >= 0)
        F2lin(in.slack_of_row[r]) = -st.y(r) - st.z(in.slack_of_row[r]);
    VectorXd F3 = in.ehat * st.tau;
    if (nf) F3.noalias() -= in.D.transpose() * st.y;
    const double pobj = pobj_internal(in, st);
    const double F4 = in.b.dot(st.y) - pobj - st.kappa;

    const double xz = inner_cone(in, st, st) + st.tau * st.kappa;
    const double mu = xz / (in.nu + 1.0);

    // --- convergence tests on the de-homogenized point -------------------
    const double tau = st.tau;
    double primal_res = 0.0, dual_res = 0.0;
    {
      VectorXd pr = eval_Ax(st.X, st.s, st.u) / tau - in.b;
      primal_res = m ? pr.cwiseAbs().maxCoeff() : 0.0;
      double dr = 0.0;
      for (int b = 0; b < nb; ++b)
        dr = std::max(dr, (Aty[b] / tau + st.Z[b] / tau - in.blocks[b].chat)
                              .cwiseAbs()
                              .maxCoeff());
      for (int r = 0; r < m; ++r)
        if (in.slack_of_row[r] >= 0)
          dr = std::max(dr, std::abs(st.y(r) / tau + st.z(in.slack_of_row[r]) / tau));
      if (nf)
        dr = std::max(dr, (in.D.transpose() * st.y / tau - in.ehat).cwiseAbs().maxCoeff());
      dual_res = dr;
    }
    const double pval = pobj / tau;
    const double dval = in.b.dot(st.y) / tau;
    const double rel_gap =
        std::abs(pval - dval) / std::max({1.0, std::abs(pval), std::abs(dval)});

    const double score = std::max({primal_res / feas_p_scale,
                                   dual_res / feas_d_scale, rel_gap});
    if (!std::isfinite(mu) || !std::isfinite(score) || !(st.tau > 0.0)) {
      st = best;
      break;
    }
    if (score < best_score) {
      best_score = score;
      best = st;
      best_iter = iter;
    } else if (score > 100.0 * best_score || iter - best_iter > 15) {
      // Diverging or stalled at the numerical floor.
      st = best;
      break;
    }

    if (settings.verbose) {
      std::printf("it %3d  mu %9.2e  pres %9.2e  dres %9.2e  gap %9.2e  tau %8.2e  kap %8.2e\n",
                  iter, mu, primal_res, dual_res, rel_gap, st.tau, st.kappa);
    }

    // Cheap screen first, then certify with the same measures residuals()
    // reports: eigenvalue-level dual feasibility included.
    if (primal_res <= settings.feas_tol * feas_p_scale &&
        dual_res <= settings.feas_tol * feas_d_scale &&
        rel_gap <= settings.gap_tol) {
      double strict_p = 0.0, strict_d = 0.0;
      {
        VectorXd ax = eval_Ax(st.X, st.s, st.u);
        for (int r = 0; r < m; ++r) {
          const int j = in.slack_of_row[r];
          const double lhs = (ax(r) - (j >= 0 ? st.s(j) : 0.0)) / tau;
          const double viol = j >= 0 ? std::max(0.0, lhs - in.b(r))
                                     : std::abs(lhs - in.b(r));
          strict_p = std::max(strict_p, viol);
        }
        for (int b = 0; b < nb; ++b) {
          Eigen::SelfAdjointEigenSolver<MatrixXd> es(
              in.blocks[b].chat - Aty[b] / tau, Eigen::EigenvaluesOnly);
          strict_d = std::max(strict_d, -es.eigenvalues().minCoeff());
        }
        for (int r = 0; r < m; ++r)
          if (in.slack_of_row[r] >= 0) strict_d = std::max(strict_d, st.y(r) / tau);
        if (nf)
          strict_d = std::max(
              strict_d, (in.D.transpose() * st.y / tau - in.ehat).cwiseAbs().maxCoeff());
      }
      if (strict_p <= settings.feas_tol && strict_d <= settings.feas_tol) {
        sol.primal_residual = strict_p;
        sol.dual_residual = strict_d;
        sol.gap = rel_gap;
        finish(SolveStatus::Optimal, st, iter);
        return sol;
      }
    }

    // Infeasibility certificates.
    const double by = in.b.dot(st.y);
    if (by > 0.0) {
      double viol = 0.0;
      for (int b = 0; b < nb; ++b) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(-Aty[b] / by, Eigen::EigenvaluesOnly);
        viol = std::max(viol, -es.eigenvalues().minCoeff());
      }
      for (int r = 0; r < m; ++r)
        if (in.slack_of_row[r] >= 0) viol = std::max(viol, st.y(r) / by);
      if (nf) viol = std::max(viol, (in.D.transpose() * st.y / by).cwiseAbs().maxCoeff());
      if (viol <= settings.feas_tol * feas_d_scale) {
        ConeState cert = st;
        cert.y /= by;
        sol.primal_residual = viol;
        sol.dual_residual = 0.0;
        sol.gap = 0.0;
        finish(SolveStatus::PrimalInfeasible, cert, iter);
        return sol;
      }
    }
    const double negc = -pobj;
    if (negc > 0.0) {
      VectorXd ax = eval_Ax(st.X, st.s, st.u) / negc;
      if ((m == 0 || ax.cwiseAbs().maxCoeff() <= settings.feas_tol * feas_p_scale)) {
        ConeState cert = st;
        for (int b = 0; b < nb; ++b) cert.X[b] /= negc;
        sol.primal_residual = 0.0;
        sol.dual_residual = 0.0;
        sol.gap = 0.0;
        finish(SolveStatus::DualInfeasible, cert, iter);
        return sol;
      }
    }

    // --- scaling quantities and Schur complement --------------------------
    bool fact_ok = true;
    for (int b = 0; b < nb; ++b) {
      Eigen::LLT<MatrixXd> llt(st.Z[b]);
      if (llt.info() != Eigen::Success) { fact_ok = false; break; }
      Zi[b] = llt.solve(MatrixXd::Identity(in.blocks[b].dim, in.blocks[b].dim));
    }
    if (!fact_ok) break;
    wlin = st.s.cwiseQuotient(st.z);

    M.setZero();
    for (int b = 0; b < nb; ++b) {
      const BlockData& bd = in.blocks[b];
      const int n = bd.dim;
      MatrixXd U(n, n);
      for (size_t kj = 0; kj < bd.row_ids.size(); ++kj) {
        const int j = bd.row_ids[kj];
        U.setZero();
        for (int t = bd.entry_start[kj]; t < bd.entry_start[kj + 1]; ++t) {
          const Entry& e = bd.entries[t];
          U.noalias() += e.value * Zi[b].col(e.row) * st.X[b].row(e.col);
          if (e.row != e.col)
            U.noalias() += e.value * Zi[b].col(e.col) * st.X[b].row(e.row);
        }
        for (size_t ki = 0; ki <= kj; ++ki) {
          const int i = bd.row_ids[ki];
          double acc = 0.0;
          for (int t = bd.entry_start[ki]; t < bd.entry_start[ki + 1]; ++t) {
            const Entry& e = bd.entries[t];
            acc += (e.row == e.col) ? e.value * U(e.row, e.col)
                                    : e.value * (U(e.row, e.col) + U(e.col, e.row));
          }
          M(std::max(i, j), std::min(i, j)) += acc;
        }
      }
    }
    for (int r = 0; r < m; ++r)
      if (in.slack_of_row[r] >= 0) M(r, r) += wlin(in.slack_of_row[r]);
    M.triangularView<Eigen::Upper>() = M.transpose();
    Msave = M;

    if (!have_lock) {
      // The skip pattern found under the identity scaling identifies the
      // structurally dependent rows; it stays valid for every iteration.
      mchol.factor(M, 1e-10, nullptr);
      skip_lock = mchol.skipped();
      have_lock = true;
      mchol.factor(M, 0.0, &skip_lock);
    } else {
      double ridge = 0.0;
      while (mchol.factor(M, 0.0, &skip_lock, ridge) > 0 && ridge < 1e-7)
        ridge = ridge == 0.0 ? 1e-13 : ridge * 100.0;
    }

    if (nf) {
      W = in.D;
      mchol.solve_in_place(W);
      Ssmall.noalias() = in.D.transpose() * W;
      double ridge = 0.0;
      while (schol.factor(Ssmall, 1e-12, nullptr, ridge) > 0 && ridge < 1e-7)
        ridge = ridge == 0.0 ? 1e-13 : ridge * 100.0;
    }

    auto core_solve = [&](const VectorXd& g1, const VectorXd& g2, VectorXd& dy,
                          VectorXd& du) {
      VectorXd t = g1;
      mchol.solve_in_place(t);
      if (nf) {
        VectorXd rhs = in.D.transpose() * t - g2;
        schol.solve_in_place(rhs);
        du = rhs;
        dy = t - W * du;
      } else {
        du.resize(0);
        dy = t;
      }
      // One iterative refinement pass against the saved Schur matrix.
      VectorXd r1 = g1 - Msave.selfadjointView<Eigen::Lower>() * dy;
      if (nf) r1.noalias() -= in.D * du;
      VectorXd t2 = r1;
      mchol.solve_in_place(t2);
      if (nf) {
        VectorXd r2 = g2 - in.D.transpose() * dy;
        VectorXd rhs2 = in.D.transpose() * t2 - r2;
        schol.solve_in_place(rhs2);
        du += rhs2;
        dy += t2 - W * rhs2;
      } else {
        dy += t2;
      }
    };

    // tau-column pieces.
    VectorXd pvec = VectorXd::Zero(m);
    double rho = 0.0;
    std::vector<MatrixXd> Tc(nb);
    for (int b = 0; b < nb; ++b) {
      Tc[b].noalias() = Zi[b] * in.blocks[b].chat * st.X[b];
      const BlockData& bd = in.blocks[b];
      for (size_t k = 0; k < bd.row_ids.size(); ++k) {
        double acc = 0.0;
        for (int t = bd.entry_start[k]; t < bd.entry_start[k + 1]; ++t) {
          const Entry& e = bd.entries[t];
          acc += (e.row == e.col) ? e.value * Tc[b](e.row, e.col)
                                  : e.value * (Tc[b](e.row, e.col) + Tc[b](e.col, e.row));
        }
        pvec(bd.row_ids[k]) += acc;
      }
      rho += in.blocks[b].chat.cwiseProduct(Tc[b].transpose()).sum();
    }

    VectorXd wb_y, wb_u;
    core_solve(in.b + pvec, in.ehat, wb_y, wb_u);

    auto newton = [&](double sigma, const ConeDir* aff, ConeDir& d) {
      const double eta = 1.0 - sigma;
      // Complementarity targets.
      std::vector<MatrixXd> R5(nb);
      for (int b = 0; b < nb; ++b) {
        R5[b] = sigma * mu * MatrixXd::Identity(in.blocks[b].dim, in.blocks[b].dim) -
                st.Z[b] * st.X[b];
        if (aff) R5[b].noalias() -= aff->dZ[b] * aff->dX[b];
      }
      VectorXd r5 = sigma * mu * VectorXd::Ones(in.n_lin) -
                    st.z.cwiseProduct(st.s);
      if (aff) r5 -= aff->dz.cwiseProduct(aff->ds);
      double r6 = sigma * mu - st.tau * st.kappa;
      if (aff) r6 -= aff->dtau * aff->dkappa;

      VectorXd r1 = -eta * F1;
      VectorXd r3 = -eta * F3;
      const double r4 = -eta * F4;
      std::vector<MatrixXd> R2(nb);
      for (int b = 0; b < nb; ++b) R2[b] = -eta * F2[b];
      VectorXd R2lin = -eta * F2lin;

      // Reduce to the (dy, du, dtau) system.
      VectorXd rhat1 = r1;
      double cdot = 0.0;  // <chat, Zi*(R5 + R2*X)>
      std::vector<MatrixXd> Tb(nb);
      for (int b = 0; b < nb; ++b) {
        Tb[b].noalias() = Zi[b] * (R5[b] + R2[b] * st.X[b]);
        const BlockData& bd = in.blocks[b];
        for (size_t k = 0; k < bd.row_ids.size(); ++k) {
          double acc = 0.0;
          for (int t = bd.entry_start[k]; t < bd.entry_start[k + 1]; ++t) {
            const Entry& e = bd.entries[t];
            acc += (e.row == e.col)
                       ? e.value * Tb[b](e.row, e.col)
                       : e.value * (Tb[b](e.row, e.col) + Tb[b](e.col, e.row));
          }
          rhat1(bd.row_ids[k]) -= acc;
        }
        cdot += in.blocks[b].chat.cwiseProduct(Tb[b].transpose()).sum();
      }
      for (int r = 0; r < m; ++r) {
        const int j = in.slack_of_row[r];
        if (j >= 0) rhat1(r) -= (r5(j) + st.s(j) * R2lin(j)) / st.z(j);
      }
      const double rhat4 = r4 + cdot + r6 / st.tau;

      VectorXd wr_y, wr_u;
      core_solve(rhat1, -r3, wr_y, wr_u);

      const double denom = (in.b - pvec).dot(wb_y) -
                           (nf ? in.ehat.dot(wb_u) : 0.0) + rho +
                           st.kappa / st.tau;
      double num = rhat4 - (in.b - pvec).dot(wr_y);
      if (nf) num += in.ehat.dot(wr_u);
      d.dtau = std::abs(denom) > 1e-300 ? num / denom : 0.0;

      d.dy = wr_y + d.dtau * wb_y;
      d.du = nf ? VectorXd(wr_u + d.dtau * wb_u) : VectorXd();
      d.dkappa = (r6 - st.kappa * d.dtau) / st.tau;

      std::vector<MatrixXd> Atdy = eval_Aty(d.dy);
      d.dZ.resize(nb);
      d.dX.resize(nb);
      for (int b = 0; b < nb; ++b) {
        d.dZ[b] = -Atdy[b] + in.blocks[b].chat * d.dtau - R2[b];
        MatrixXd raw = Zi[b] * (R5[b] - d.dZ[b] * st.X[b]);
        d.dX[b] = 0.5 * (raw + raw.transpose());
      }
      d.dz.resize(in.n_lin);
      d.ds.resize(in.n_lin);
      for (int r = 0; r < m; ++r) {
        const int j = in.slack_of_row[r];
        if (j >= 0) {
          d.dz(j) = -d.dy(r) - R2lin(j);
          d.ds(j) = (r5(j) - st.s(j) * d.dz(j)) / st.z(j);
        }
      }
    };

    auto max_step = [&](const ConeDir& d) {
      double am = kInf;
      for (int b = 0; b < nb; ++b) {
        am = std::min(am, max_step_psd(st.X[b], d.dX[b]));
        am = std::min(am, max_step_psd(st.Z[b], d.dZ[b]));
      }
      am = std::min(am, max_step_vec(st.s, d.ds));
      am = std::min(am, max_step_vec(st.z, d.dz));
      if (d.dtau < 0.0) am = std::min(am, -st.tau / d.dtau);
      if (d.dkappa < 0.0) am = std::min(am, -st.kappa / d.dkappa);
      return am;
    };

    ConeDir aff;
    newton(0.0, nullptr, aff);
    const double a_aff = std::min(1.0, 0.99 * max_step(aff));

    double mu_aff = 0.0;
    {
      double acc = (st.tau + a_aff * aff.dtau) * (st.kappa + a_aff * aff.dkappa);
      for (int b = 0; b < nb; ++b)
        acc += (st.X[b] + a_aff * aff.dX[b])
                   .cwiseProduct(st.Z[b] + a_aff * aff.dZ[b])
                   .sum();
      acc += (st.s + a_aff * aff.ds).dot(st.z + a_aff * aff.dz);
      mu_aff = acc / (in.nu + 1.0);
    }
    double sigma = std::pow(std::max(0.0, mu_aff / mu), 3.0);
    sigma = std::min(0.999, std::max(1e-8, sigma));

    ConeDir dir;
    newton(sigma, &aff, dir);
    const double alpha = std::min(1.0, 0.99 * max_step(dir));

    if (alpha < 1e-7) {
      if (++tiny_steps >= 3) break;
    } else {
      tiny_steps = 0;
    }

    for (int b = 0; b < nb; ++b) {
      st.X[b] += alpha * dir.dX[b];
      st.Z[b] += alpha * dir.dZ[b];
      st.X[b] = 0.5 * (st.X[b] + st.X[b].transpose()).eval();
      st.Z[b] = 0.5 * (st.Z[b] + st.Z[b].transpose()).eval();
    }
    st.s += alpha * dir.ds;
    st.z += alpha * dir.dz;
    st.u += alpha * dir.du;
    st.y += alpha * dir.dy;
    st.tau += alpha * dir.dtau;
    st.kappa += alpha * dir.dkappa;
  }

  // Max iterations or numerical stall: report the de-homogenized iterate.
  {
    const double t = std::max(st.tau, 1e-300);
    VectorXd pr = eval_Ax(st.X, st.s, st.u) / t - in.b;
    sol.primal_residual = m ? pr.cwiseAbs().maxCoeff() : 0.0;
    std::vector<MatrixXd> Aty = eval_Aty(st.y);
    double dr = 0.0;
    for (int b = 0; b < nb; ++b)
      dr = std::max(dr, (Aty[b] / t + st.Z[b] / t - in.blocks[b].chat)
                            .cwiseAbs()
                            .maxCoeff());
    sol.dual_residual = dr;
    const double pv = pobj_internal(in, st) / t;
    const double dv = in.b.dot(st.y) / t;
    sol.gap = std::abs(pv - dv) / std::max({1.0, std::abs(pv), std::abs(dv)});
  }
  finish(SolveStatus::NumericalLimit, st, iter);
  return sol;
}

ResidualReport residuals(const SdpProblem& problem, const SdpSolution& candidate) {
  problem.validate();
  if (candidate.block_values.size() != problem.psd_blocks.size())
    throw std::invalid_argument("candidate block count mismatch");
  for (size_t b = 0; b < problem.psd_blocks.size(); ++b)
    if (candidate.block_values[b].rows() != problem.psd_blocks[b].dim ||
        candidate.block_values[b].cols() != problem.psd_blocks[b].dim)
      throw std::invalid_argument("candidate block dimension mismatch");
  if (candidate.free_values.size() != problem.num_free)
    throw std::invalid_argument("candidate free variable count mismatch");
  const int m_eq = static_cast<int>(problem.eq_constraints.size());
  const int m_in = static_cast<int>(problem.ineq_constraints.size());
  if (candidate.dual_values.size() != m_eq + m_in)
    throw std::invalid_argument("candidate dual vector size mismatch");

  std::unordered_map<int, int> block_index;
  for (int bi = 0; bi < static_cast<int>(problem.psd_blocks.size()); ++bi)
    block_index.emplace(problem.psd_blocks[bi].id, bi);

  auto eval_fn = [&](const LinearFunctional& f) {
    double acc = 0.0;
    for (const BlockCoeff& c : f.blocks) {
      const MatrixXd& X = candidate.block_values[block_index.at(c.block_id)];
      acc += (c.row == c.col) ? c.value * X(c.row, c.col)
                              : 2.0 * c.value * X(c.row, c.col);
    }
    for (const FreeCoeff& c : f.free_vars) acc += c.value * candidate.free_values(c.index);
    return acc;
  };

  ResidualReport rep;
  for (int i = 0; i < m_eq; ++i)
    rep.primal_feas = std::max(rep.primal_feas,
                               std::abs(eval_fn(problem.eq_constraints[i].lhs) -
                                        problem.eq_constraints[i].rhs));
  for (int i = 0; i < m_in; ++i)
    rep.primal_feas = std::max(rep.primal_feas,
                               eval_fn(problem.ineq_constraints[i].lhs) -
                                   problem.ineq_constraints[i].rhs);
  rep.primal_feas = std::max(rep.primal_feas, 0.0);
  for (size_t b = 0; b < problem.psd_blocks.size(); ++b) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(candidate.block_values[b],
                                               Eigen::EigenvaluesOnly);
    rep.primal_feas = std::max(rep.primal_feas, -es.eigenvalues().minCoeff());
  }

  // Dual: Z = sum_i y_i A_i - C must be PSD, D'y = e, y >= 0 on inequalities.
  std::vector<MatrixXd> Zimp(problem.psd_blocks.size());
  for (size_t b = 0; b < problem.psd_blocks.size(); ++b)
    Zimp[b] = MatrixXd::Zero(problem.psd_blocks[b].dim, problem.psd_blocks[b].dim);
  VectorXd dty = VectorXd::Zero(problem.num_free);
  auto accumulate = [&](const LinearFunctional& f, double w) {
    for (const BlockCoeff& c : f.blocks) {
      MatrixXd& Z = Zimp[block_index.at(c.block_id)];
      Z(c.row, c.col) += w * c.value;
      if (c.row != c.col) Z(c.col, c.row) += w * c.value;
    }
    for (const FreeCoeff& c : f.free_vars) dty(c.index) += w * c.value;
  };
  for (int i = 0; i < m_eq; ++i)
    accumulate(problem.eq_constraints[i].lhs, candidate.dual_values(i));
  for (int i = 0; i < m_in; ++i) {
    const double yv = candidate.dual_values(m_eq + i);
    accumulate(problem.ineq_constraints[i].lhs, yv);
    rep.dual_feas = std::max(rep.dual_feas, -yv);
  }
  accumulate(problem.objective, -1.0);
  for (size_t b = 0; b < problem.psd_blocks.size(); ++b) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(Zimp[b], Eigen::EigenvaluesOnly);
    rep.dual_feas = std::max(rep.dual_feas, -es.eigenvalues().minCoeff());
  }
  // dty now holds D'y - e; stationarity over the free variables.
  if (problem.num_free)
    rep.dual_feas = std::max(rep.dual_feas, dty.cwiseAbs().maxCoeff());
  rep.dual_feas = std::max(rep.dual_feas, 0.0);

  double pobj = eval_fn(problem.objective);
  double dobj = 0.0;
  for (int i = 0; i < m_eq; ++i)
    dobj += candidate.dual_values(i) * problem.eq_constraints[i].rhs;
  for (int i = 0; i < m_in; ++i)
    dobj += candidate.dual_values(m_eq + i) * problem.ineq_constraints[i].rhs;
  rep.gap = std::abs(pobj - dobj);
  return rep;
}

void dump_problem(const SdpProblem& problem, std::ostream& os) {
  os << "# decpep sdp dump\n";
  os << "# blocks:";
  for (const PsdBlock& b : problem.psd_blocks) os << ' ' << b.id << ':' << b.dim;
  os << "\n# eq " << problem.eq_constraints.size() << " ineq "
     << problem.ineq_constraints.size() << " free " << problem.num_free << "\n";
  os << "# constraint-id block-id row col value; id 0 = objective;"
        " block -1 = free var, block -2 = rhs/offset\n";
  char buf[128];
  auto emit = [&](int cid, const LinearFunctional& f, double rhs) {
    for (const BlockCoeff& c : f.blocks) {
      std::snprintf(buf, sizeof buf, "%d %d %d %d %.17g\n", cid, c.block_id, c.row,
                    c.col, c.value);
      os << buf;
    }
    for (const FreeCoeff& c : f.free_vars) {
      std::snprintf(buf, sizeof buf, "%d -1 %d 0 %.17g\n", cid, c.index, c.value);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "%d -2 0 0 %.17g\n", cid, rhs);
    os << buf;
  };
  emit(0, problem.objective, problem.objective_offset);
  int cid = 1;
  for (const auto& c : problem.eq_constraints) emit(cid++, c.lhs, c.rhs);
  for (const auto& c : problem.ineq_constraints) emit(cid++, c.lhs, c.rhs);
}

}  // namespace decpep
