#include "decpep/recovery.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace decpep {

ReconstructedInstance factor_gram(const Eigen::MatrixXd& gram,
                                  const Eigen::VectorXd& fvals, double rank_tol) {
  if (gram.rows() != gram.cols())
    throw std::invalid_argument("factor_gram: matrix must be square");
  const int n = static_cast<int>(gram.rows());
  Eigen::MatrixXd sym = 0.5 * (gram + gram.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::VectorXd& ev = es.eigenvalues();  // ascending
  const double lmax = std::max(ev.maxCoeff(), 0.0);
  const double cut = rank_tol * std::max(lmax, 1e-300);
  if (ev.minCoeff() < -cut)
    throw std::invalid_argument("factor_gram: matrix is indefinite beyond tolerance");

  int d = 0;
  for (int i = 0; i < n; ++i)
    if (ev(i) > cut) ++d;

  ReconstructedInstance inst;
  inst.dimension = d;
  inst.coords.resize(std::max(d, 1), n);
  inst.coords.setZero();
  int r = 0;
  for (int i = n - 1; i >= 0; --i) {  // largest eigenvalues first
    if (ev(i) <= cut) continue;
    inst.coords.row(r++) = std::sqrt(ev(i)) * es.eigenvectors().col(i).transpose();
  }
  inst.fvals = fvals;
  return inst;
}

Eigen::VectorXd coordinates(const ReconstructedInstance& inst, const VectorExpr& e) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(inst.coords.rows());
  for (const auto& [p, c] : e.coeffs()) {
    if (p < 0 || p >= inst.coords.cols())
      throw std::out_of_range("coordinates: point id outside instance");
    v += c * inst.coords.col(p);
  }
  return v;
}

Eigen::MatrixXd pseudoinverse(const Eigen::MatrixXd& a, double rel_tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cut = rel_tol * (sv.size() ? sv(0) : 0.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > cut) inv(i) = 1.0 / sv(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

RecoveredMatrix estimate_matrix(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                const SpectralClass& cls, double rank_tol) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw std::invalid_argument("estimate_matrix: X and Y shapes differ");
  if (x.norm() <= 1e-12 * std::max(1.0, y.norm()))
    throw std::invalid_argument(
        "estimate_matrix: degenerate instance, consensus inputs are zero");

  RecoveredMatrix rec;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x);
  rec.x_rank_deficient = svd.singularValues().size() < x.rows() ||
                         svd.singularValues().minCoeff() <=
                             rank_tol * svd.singularValues().maxCoeff();
  rec.what.entries = y * pseudoinverse(x, rank_tol);
  const double ynorm = y.norm();
  rec.residual = ynorm > 0.0 ? (y - rec.what.entries * x).norm() / ynorm : 0.0;
  rec.membership = membership_check(rec.what, cls, 1e-6);
  return rec;
}

RecoveredMatrix estimate_worst_matrix(const ReconstructedInstance& inst,
                                      const DgdBuild& build, const DgdSpec& spec,
                                      double rank_tol) {
  if (spec.mode != MatrixMode::Spectral)
    throw std::invalid_argument("estimate_worst_matrix: spectral-mode instance required");
  const int n = spec.n_agents;
  const int kk = static_cast<int>(build.cons_in.size());
  const int d = static_cast<int>(inst.coords.rows());

  Eigen::MatrixXd X(n, d * kk), Y(n, d * kk);
  for (int k = 0; k < kk; ++k) {
    for (int i = 0; i < n; ++i) {
      X.row(i).segment(k * d, d) = coordinates(inst, build.cons_in[k][i]).transpose();
      Y.row(i).segment(k * d, d) = coordinates(inst, build.cons_out[k][i]).transpose();
    }
  }
  return estimate_matrix(X, Y, spec.cls, rank_tol);
}

ExplicitMatrix project_generalized_doubly_stochastic(const ExplicitMatrix& w) {
  if (w.entries.rows() != w.entries.cols())
    throw std::invalid_argument("projection requires a square matrix");
  const int n = w.size();
  Eigen::MatrixXd s = 0.5 * (w.entries + w.entries.transpose());
  const Eigen::VectorXd e = s * Eigen::VectorXd::Ones(n) - Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  ExplicitMatrix out;
  out.entries = s - (e * ones.transpose() + ones * e.transpose()) / n +
                (e.sum() / (n * n)) * Eigen::MatrixXd::Ones(n, n);
  return out;
}

ExplicitMatrix w1_matrix(int n_agents, double lam) {
  if (n_agents < 2) throw std::invalid_argument("w1_matrix requires N >= 2");
  if (lam < -1.0 || lam > 1.0)
    throw std::invalid_argument("w1_matrix requires lam in [-1, 1]");
  const double a = (1.0 + lam) / n_agents;
  ExplicitMatrix w;
  w.entries = Eigen::MatrixXd::Constant(n_agents, n_agents, a);
  w.entries.diagonal().setConstant(1.0 - (n_agents - 1) * a);
  return w;
}

void dump_instance_csv(const ReconstructedInstance& inst, std::ostream& os) {
  os << "kind,id";
  for (int j = 0; j < inst.coords.rows(); ++j) os << ",x" << j;
  os << "\n";
  char buf[64];
  for (int p = 0; p < inst.coords.cols(); ++p) {
    os << "point," << p;
    for (int j = 0; j < inst.coords.rows(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", inst.coords(j, p));
      os << ',' << buf;
    }
    os << "\n";
  }
  for (int k = 0; k < inst.fvals.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", inst.fvals(k));
    os << "fval," << k << ',' << buf << "\n";
  }
}

}  // namespace decpep
