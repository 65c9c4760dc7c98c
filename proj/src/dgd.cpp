#include "decpep/dgd.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace decpep {

const char* to_string(PerfMeasure m) {
  switch (m) {
    case PerfMeasure::FGapAveragedIterate: return "avg";
    case PerfMeasure::FGapLastIterateMean: return "last-mean";
    case PerfMeasure::ConsensusError: return "consensus";
  }
  return "unknown";
}

const char* to_string(MatrixMode m) {
  return m == MatrixMode::Exact ? "exact" : "spectral";
}

PerfMeasure parse_measure(const std::string& s) {
  if (s == "avg") return PerfMeasure::FGapAveragedIterate;
  if (s == "last-mean") return PerfMeasure::FGapLastIterateMean;
  if (s == "consensus") return PerfMeasure::ConsensusError;
  throw std::invalid_argument("unknown measure: " + s);
}

double DgdSpec::alpha() const {
  if (step_size > 0.0) return step_size;
  const double hh = h > 0.0 ? h : 1.0;
  return hh / std::sqrt(static_cast<double>(n_iters));
}

void DgdSpec::validate() const {
  if (n_agents < 1) throw std::invalid_argument("n_agents must be >= 1");
  if (n_iters < 1) throw std::invalid_argument("n_iters must be >= 1");
  if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
  if (!(bound > 0.0)) throw std::invalid_argument("bound must be positive");
  if (step_size < 0.0 || h < 0.0)
    throw std::invalid_argument("step size parameters must be positive");
  if (step_size > 0.0 && h > 0.0) {
    const double implied = h / std::sqrt(static_cast<double>(n_iters));
    if (std::abs(step_size - implied) > 1e-12 * std::max(1.0, implied))
      throw std::invalid_argument("step_size and h are inconsistent");
  }
  if (!(alpha() > 0.0)) throw std::invalid_argument("step size must be positive");
  if (mode == MatrixMode::Exact) {
    if (matrix.entries.rows() != matrix.entries.cols())
      throw std::invalid_argument("communication matrix must be square");
    if (matrix.size() != n_agents)
      throw std::invalid_argument("communication matrix size must equal n_agents");
  }
}

DgdBuild build_dgd(const DgdSpec& spec) {
  spec.validate();
  const int n = spec.n_agents;
  const int kk = spec.n_iters;
  const double a = spec.alpha();

  DgdBuild b;
  PepProblem& pb = b.problem;

  // x* is pinned to the origin; one shared starting point.
  b.x0 = pb.add_point();
  const VectorExpr x0{b.x0};
  const VectorExpr xstar = VectorExpr::zero();

  for (int i = 0; i < n; ++i)
    b.functions.emplace_back(FunctionClass::bounded(spec.bound),
                             "f" + std::to_string(i + 1));

  b.iterates.assign(n, std::vector<VectorExpr>(kk + 1));
  for (int i = 0; i < n; ++i) b.iterates[i][0] = x0;

  ConsensusBlock cblock;
  cblock.n_agents = n;
  cblock.cls = spec.cls;

  for (int k = 0; k < kk; ++k) {
    std::vector<VectorExpr> grads(n);
    for (int i = 0; i < n; ++i)
      grads[i] = VectorExpr(b.functions[i].eval(pb, b.iterates[i][k]).g);

    std::vector<VectorExpr> xcols(n), ycols(n);
    for (int i = 0; i < n; ++i) xcols[i] = b.iterates[i][k];
    if (spec.mode == MatrixMode::Spectral) {
      for (int i = 0; i < n; ++i) ycols[i] = VectorExpr(pb.add_point());
      cblock.steps.push_back({xcols, ycols});
    } else {
      ycols = exact_consensus(spec.matrix, xcols);
    }
    b.cons_in.push_back(xcols);
    b.cons_out.push_back(ycols);

    for (int i = 0; i < n; ++i) b.iterates[i][k + 1] = ycols[i] - a * grads[i];
  }

  for (int i = 0; i < n; ++i) b.functions[i].eval(pb, b.iterates[i][kk]);
  for (int i = 0; i < n; ++i) b.at_star.push_back(b.functions[i].eval(pb, xstar));

  if (spec.measure == PerfMeasure::FGapAveragedIterate) {
    VectorExpr acc;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k <= kk; ++k) acc += b.iterates[i][k];
    b.x_eval = acc / static_cast<double>(n * (kk + 1));
  } else if (spec.measure == PerfMeasure::FGapLastIterateMean) {
    VectorExpr acc;
    for (int i = 0; i < n; ++i) acc += b.iterates[i][kk];
    b.x_eval = acc / static_cast<double>(n);
  }
  if (spec.measure != PerfMeasure::ConsensusError)
    for (int i = 0; i < n; ++i) b.at_eval.push_back(b.functions[i].eval(pb, b.x_eval));

  // All points exist now; emit constraints.
  if (spec.mode == MatrixMode::Spectral) spectral_consensus(cblock, pb);
  for (int i = 0; i < n; ++i) b.functions[i].add_interpolation_constraints(pb);

  VectorExpr grad_sum;
  for (int i = 0; i < n; ++i) grad_sum += VectorExpr(b.at_star[i].g);
  pb.add_linear_vector_equality(grad_sum, VectorExpr::zero());

  pb.add_ineq(inner(x0 - xstar, x0 - xstar) - spec.radius * spec.radius);

  ScalarExpr obj;
  if (spec.measure == PerfMeasure::ConsensusError) {
    VectorExpr mean;
    for (int i = 0; i < n; ++i) mean += b.iterates[i][kk];
    mean *= 1.0 / n;
    for (int i = 0; i < n; ++i) obj += sq_norm(b.iterates[i][kk] - mean);
    obj *= 1.0 / n;
  } else {
    for (int i = 0; i < n; ++i)
      obj += ScalarExpr(b.at_eval[i].f) - ScalarExpr(b.at_star[i].f);
    obj *= 1.0 / n;
  }
  pb.set_objective(std::move(obj));
  return b;
}

PepSolution worst_case(const DgdSpec& spec, const SolverSettings& settings) {
  DgdBuild b = build_dgd(spec);
  return solve_pep(b.problem, settings);
}

double theory_bound(int n_iters, double lam, double radius, double bound) {
  if (n_iters < 1) throw std::invalid_argument("n_iters must be >= 1");
  if (!(lam >= 0.0 && lam < 1.0))
    throw std::invalid_argument("theory bound requires lam in [0, 1)");
  if (!(radius > 0.0 && bound > 0.0))
    throw std::invalid_argument("radius and bound must be positive");
  const double sk = std::sqrt(static_cast<double>(n_iters));
  return (radius * radius + bound * bound) / (2.0 * sk) +
         2.0 * bound * bound / (sk * (1.0 - lam));
}

double scaled_theory_bound(int n_iters, double lam, double radius, double bound,
                           double h) {
  if (n_iters < 1) throw std::invalid_argument("n_iters must be >= 1");
  if (!(lam >= 0.0 && lam < 1.0))
    throw std::invalid_argument("theory bound requires lam in [0, 1)");
  if (!(h > 0.0)) throw std::invalid_argument("h must be positive");
  if (!(radius > 0.0 && bound > 0.0))
    throw std::invalid_argument("radius and bound must be positive");
  const double sk = std::sqrt(static_cast<double>(n_iters));
  return radius * bound *
         ((1.0 / h + h) / (2.0 * sk) + 2.0 * h / (sk * (1.0 - lam)));
}

double scale_worst_case(double w_unit, double radius, double bound) {
  return radius * bound * w_unit;
}

DgdSpec load_spec(std::istream& is, const std::string& base_dir) {
  DgdSpec spec;
  bool have_lam = false, have_lm = false, have_lp = false;
  double lam = 0.0, lm = 0.0, lp = 0.0;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto pos = line.find('#');
    if (pos != std::string::npos) line.erase(pos);
    std::replace(line.begin(), line.end(), '=', ' ');
    std::replace(line.begin(), line.end(), ':', ' ');
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key)) continue;
    std::string value;
    if (!(ss >> value))
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": missing value for " + key);
    auto num = [&]() {
      try {
        size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
      } catch (const std::exception&) {
        throw std::runtime_error("config line " + std::to_string(lineno) +
                                 ": bad number '" + value + "'");
      }
    };
    if (key == "n_agents") spec.n_agents = static_cast<int>(num());
    else if (key == "n_iters") spec.n_iters = static_cast<int>(num());
    else if (key == "step_size") spec.step_size = num();
    else if (key == "h") spec.h = num();
    else if (key == "radius") spec.radius = num();
    else if (key == "bound") spec.bound = num();
    else if (key == "lambda") { lam = num(); have_lam = true; }
    else if (key == "lambda_minus") { lm = num(); have_lm = true; }
    else if (key == "lambda_plus") { lp = num(); have_lp = true; }
    else if (key == "measure") spec.measure = parse_measure(value);
    else if (key == "mode") {
      if (value == "exact") spec.mode = MatrixMode::Exact;
      else if (value == "spectral") spec.mode = MatrixMode::Spectral;
      else throw std::runtime_error("config line " + std::to_string(lineno) +
                                    ": unknown mode '" + value + "'");
    } else if (key == "matrix_file") {
      const std::string path =
          (!base_dir.empty() && value.front() != '/') ? base_dir + "/" + value : value;
      spec.matrix = load_matrix_file(path);
      spec.mode = MatrixMode::Exact;
    } else {
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": unknown key '" + key + "'");
    }
  }
  if (have_lam && (have_lm || have_lp))
    throw std::runtime_error("config: lambda and lambda_minus/plus are exclusive");
  if (have_lam) spec.cls = SpectralClass::symmetric(lam);
  else if (have_lm || have_lp)
    spec.cls = SpectralClass(have_lm ? lm : -1.0, have_lp ? lp : 1.0);
  spec.validate();
  return spec;
}

DgdSpec load_spec_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  const auto slash = path.find_last_of('/');
  return load_spec(f, slash == std::string::npos ? "" : path.substr(0, slash));
}

}  // namespace decpep
