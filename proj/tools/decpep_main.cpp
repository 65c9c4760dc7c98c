// Command-line front end: worst-case bounds for decentralized (sub)gradient
// descent via performance estimation, exact or spectral consensus modeling.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "decpep/dgd.hpp"
#include "decpep/explorer.hpp"
#include "decpep/recovery.hpp"
#include "decpep/version.hpp"

using nlohmann::json;
using namespace decpep;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitSolver = 2;
constexpr int kExitPartial = 3;

double env_tol(const char* name, double fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  try {
    const double x = std::stod(v);
    if (x > 0.0) return x;
  } catch (const std::exception&) {
  }
  std::cerr << "warning: ignoring invalid " << name << "\n";
  return fallback;
}

struct CommonOpts {
  int agents = 3;
  int iters = 10;
  double lambda = -2.0;           // unset marker
  double lambda_minus = -2.0;
  double lambda_plus = -2.0;
  double step_size = 0.0;
  double h = 0.0;
  double radius = 1.0;
  double bound = 1.0;
  std::string measure = "avg";
  std::string config;
  std::string out;
  std::string artifact;
  SolverSettings settings;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool wants_lambda) {
  cmd->set_help_flag("--help", "print this help message and exit");
  cmd->add_option("--config", o.config, "load a DGD spec config file first");
  cmd->add_option("--agents,-N", o.agents, "number of agents");
  cmd->add_option("--iters,-K", o.iters, "number of iterations");
  if (wants_lambda) {
    cmd->add_option("--lambda", o.lambda, "symmetric eigenvalue range [-lambda, lambda]");
    cmd->add_option("--lambda-minus", o.lambda_minus, "lower eigenvalue bound");
    cmd->add_option("--lambda-plus", o.lambda_plus, "upper eigenvalue bound");
  }
  cmd->add_option("--step-size", o.step_size, "constant step size alpha");
  cmd->add_option("--h", o.h, "step size as h / sqrt(K)");
  cmd->add_option("--radius,-R", o.radius, "initial distance bound R");
  cmd->add_option("--bound,-B", o.bound, "subgradient norm bound B");
  cmd->add_option("--measure", o.measure, "avg | last-mean | consensus");
  cmd->add_option("--out,-o", o.out, "write JSON output here (default stdout)");
  cmd->add_option("--gap-tol", o.settings.gap_tol, "solver relative gap tolerance");
  cmd->add_option("--feas-tol", o.settings.feas_tol, "solver feasibility tolerance");
  cmd->add_option("--max-iters", o.settings.max_iters, "solver iteration limit");
  cmd->add_flag("--verbose", o.settings.verbose, "solver iteration log");
}

DgdSpec make_spec(const CommonOpts& o, const CLI::App* cmd) {
  DgdSpec spec;
  if (!o.config.empty()) spec = load_spec_file(o.config);
  auto used = [&](const std::string& name) { return cmd->count(name) > 0; };
  if (used("--agents")) spec.n_agents = o.agents;
  if (used("--iters")) spec.n_iters = o.iters;
  if (o.config.empty() && !used("--agents")) spec.n_agents = o.agents;
  if (o.config.empty() && !used("--iters")) spec.n_iters = o.iters;
  if (used("--step-size")) {
    spec.step_size = o.step_size;
    spec.h = 0.0;
  }
  if (used("--h")) {
    spec.h = o.h;
    spec.step_size = 0.0;
  }
  if (used("--radius")) spec.radius = o.radius;
  if (used("--bound")) spec.bound = o.bound;
  if (used("--measure")) spec.measure = parse_measure(o.measure);
  if (cmd->count("--lambda")) {
    if (o.lambda < 0.0 || o.lambda > 1.0)
      throw CLI::ValidationError("--lambda must lie in [0, 1]");
    spec.cls = SpectralClass::symmetric(o.lambda);
  } else if (cmd->count("--lambda-minus") || cmd->count("--lambda-plus")) {
    const double lm = cmd->count("--lambda-minus") ? o.lambda_minus : -1.0;
    const double lp = cmd->count("--lambda-plus") ? o.lambda_plus : 1.0;
    try {
      spec.cls = SpectralClass(lm, lp);
    } catch (const std::invalid_argument& ex) {
      throw CLI::ValidationError(ex.what());
    }
  }
  return spec;
}

json spec_to_json(const DgdSpec& spec) {
  json j{{"n_agents", spec.n_agents},
         {"n_iters", spec.n_iters},
         {"step_size", spec.alpha()},
         {"radius", spec.radius},
         {"bound", spec.bound},
         {"mode", to_string(spec.mode)},
         {"measure", to_string(spec.measure)}};
  if (spec.h > 0.0) j["h"] = spec.h;
  if (spec.mode == MatrixMode::Spectral) {
    j["lambda_minus"] = spec.cls.lam_minus;
    j["lambda_plus"] = spec.cls.lam_plus;
  }
  return j;
}

DgdSpec spec_from_json(const json& j) {
  DgdSpec spec;
  spec.n_agents = j.at("n_agents").get<int>();
  spec.n_iters = j.at("n_iters").get<int>();
  spec.step_size = j.at("step_size").get<double>();
  spec.radius = j.at("radius").get<double>();
  spec.bound = j.at("bound").get<double>();
  spec.measure = parse_measure(j.at("measure").get<std::string>());
  const std::string mode = j.at("mode").get<std::string>();
  if (mode != "spectral")
    throw std::runtime_error("artifact spec must be in spectral mode");
  spec.mode = MatrixMode::Spectral;
  spec.cls = SpectralClass(j.at("lambda_minus").get<double>(),
                           j.at("lambda_plus").get<double>());
  return spec;
}

json settings_to_json(const SolverSettings& s) {
  return json{{"gap_tol", s.gap_tol},
              {"feas_tol", s.feas_tol},
              {"max_iters", s.max_iters}};
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  const int n = static_cast<int>(rows.size());
  const int c = n ? static_cast<int>(rows.at(0).size()) : 0;
  Eigen::MatrixXd m(n, c);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rows.at(i).at(j).get<double>();
  return m;
}

void write_output(const json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot write output file: " + out);
  f << j.dump(2) << "\n";
}

json run_envelope(const std::string& command, const json& manifest,
                  const json& results) {
  return json{{"command", command},
              {"version", kVersion},
              {"manifest", manifest},
              {"results", results}};
}

std::optional<double> theory_for(const DgdSpec& spec) {
  if (spec.mode != MatrixMode::Spectral) return std::nullopt;
  if (spec.cls.lam_minus != -spec.cls.lam_plus) return std::nullopt;
  const double lam = spec.cls.lam_plus;
  if (lam >= 1.0) return std::nullopt;
  const double a0 = 1.0 / std::sqrt(static_cast<double>(spec.n_iters));
  if (std::abs(spec.alpha() - a0) > 1e-12 * a0) return std::nullopt;
  return theory_bound(spec.n_iters, lam, spec.radius, spec.bound);
}

int solve_command(const std::string& name, const DgdSpec& spec,
                  const CommonOpts& o, const json& extra_results) {
  DgdBuild build = build_dgd(spec);
  PepSolution sol = solve_pep(build.problem, o.settings);

  json results{{"worst_case", sol.worst_case_value},
               {"status", to_string(sol.sdp.status)},
               {"iterations", sol.sdp.iterations},
               {"gap", sol.sdp.gap}};
  if (auto tb = theory_for(spec)) results["theory_bound"] = *tb;
  for (auto& [k, v] : extra_results.items()) results[k] = v;

  json manifest{{"spec", spec_to_json(spec)},
                {"settings", settings_to_json(o.settings)},
                {"seed", 0},
                {"solve_seconds", sol.sdp.solve_seconds}};
  write_output(run_envelope(name, manifest, results), o.out);

  if (!o.artifact.empty()) {
    json art{{"version", kVersion},
             {"spec", spec_to_json(spec)},
             {"gram", matrix_to_json(sol.gram)},
             {"fvals", json::array()},
             {"worst_case", sol.worst_case_value},
             {"status", to_string(sol.sdp.status)}};
    for (int i = 0; i < sol.fvals.size(); ++i) art["fvals"].push_back(sol.fvals(i));
    std::ofstream f(o.artifact);
    if (!f) throw std::runtime_error("cannot write artifact file: " + o.artifact);
    f << art.dump() << "\n";
  }
  return sol.sdp.status == SolveStatus::Optimal ? kExitOk : kExitSolver;
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> vals;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    size_t used = 0;
    vals.push_back(std::stod(tok, &used));
    if (used != tok.size()) throw std::invalid_argument("bad value: " + tok);
  }
  if (vals.empty()) throw std::invalid_argument("--values is empty");
  return vals;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Worst-case performance bounds for decentralized subgradient descent"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonOpts spectral_o, exact_o, sweep_o, search_o, theory_o;
  spectral_o.settings.gap_tol = env_tol("DECPEP_GAP_TOL", 1e-6);
  spectral_o.settings.feas_tol = env_tol("DECPEP_FEAS_TOL", 1e-8);
  exact_o.settings = spectral_o.settings;
  sweep_o.settings = spectral_o.settings;
  search_o.settings = spectral_o.settings;

  auto* c_spectral = app.add_subcommand(
      "spectral", "worst case over the spectral matrix class W(-lambda, lambda)");
  add_common(c_spectral, spectral_o, true);
  c_spectral->add_option("--artifact", spectral_o.artifact,
                         "also write a solution artifact (for `recover`)");

  auto* c_exact =
      app.add_subcommand("exact", "worst case for a given communication matrix");
  std::string matrix_file;
  add_common(c_exact, exact_o, false);
  c_exact->add_option("--matrix", matrix_file, "communication matrix file")
      ->required();

  auto* c_sweep = app.add_subcommand("sweep", "one solve per grid value of an axis");
  std::string axis_str = "lambda", values_str;
  int jobs = 1;
  std::string csv_out;
  add_common(c_sweep, sweep_o, true);
  c_sweep->add_option("--axis", axis_str, "lambda | n_agents | n_iters | step_size")
      ->required();
  c_sweep->add_option("--values", values_str, "comma-separated grid values")
      ->required();
  c_sweep->add_option("--jobs,-j", jobs, "parallel solves");
  c_sweep->add_option("--csv", csv_out, "write the sweep table CSV here");

  auto* c_search = app.add_subcommand(
      "search", "random search for worst doubly stochastic matrices");
  uint64_t seed = 1;
  int n_samples = 100;
  std::string search_csv;
  add_common(c_search, search_o, true);
  c_search->add_option("--samples", n_samples, "number of random candidates");
  c_search->add_option("--seed", seed, "RNG seed");
  c_search->add_option("--csv", search_csv, "write the per-sample table CSV here");

  auto* c_recover =
      app.add_subcommand("recover", "estimate the worst matrix from an artifact");
  std::string artifact_in, matrix_out;
  std::string recover_out;
  double rank_tol = 1e-6;
  c_recover->add_option("--artifact", artifact_in, "artifact written by `spectral`")
      ->required();
  c_recover->add_option("--matrix-out", matrix_out, "write W-hat in matrix format");
  c_recover->add_option("--out,-o", recover_out, "write JSON output here");
  c_recover->add_option("--rank-tol", rank_tol, "relative rank tolerance");

  auto* c_theory = app.add_subcommand("theory", "closed-form DGD performance bound");
  add_common(c_theory, theory_o, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_spectral->parsed()) {
      DgdSpec spec = make_spec(spectral_o, c_spectral);
      spec.mode = MatrixMode::Spectral;
      spec.validate();
      return solve_command("spectral", spec, spectral_o, json::object());
    }
    if (c_exact->parsed()) {
      DgdSpec spec = make_spec(exact_o, c_exact);
      spec.mode = MatrixMode::Exact;
      spec.matrix = load_matrix_file(matrix_file);
      spec.n_agents = spec.matrix.size();
      spec.validate();
      MembershipReport rep = membership_check(spec.matrix, SpectralClass(-1.0, 1.0));
      json extra{{"matrix_check",
                  {{"max_asymmetry", rep.max_asymmetry},
                   {"max_row_sum_dev", rep.max_row_sum_dev},
                   {"max_col_sum_dev", rep.max_col_sum_dev},
                   {"nonnegative", rep.nonnegative},
                   {"spectrum", json::array()}}}};
      for (int i = 0; i < rep.spectrum.size(); ++i)
        extra["matrix_check"]["spectrum"].push_back(rep.spectrum(i));
      return solve_command("exact", spec, exact_o, extra);
    }
    if (c_sweep->parsed()) {
      SweepGrid grid;
      grid.axis = parse_axis(axis_str);
      grid.values = parse_values(values_str);
      grid.base = make_spec(sweep_o, c_sweep);
      grid.base.mode = MatrixMode::Spectral;
      auto rows = sweep(grid, sweep_o.settings, jobs);

      json jrows = json::array();
      bool any_failed = false;
      for (const SweepRow& r : rows) {
        json jr{{"axis_value", r.axis_value},
                {"worst_case", r.worst_case},
                {"status", to_string(r.status)},
                {"solve_seconds", r.solve_seconds}};
        if (r.theory) jr["theory_bound"] = *r.theory;
        if (!r.error.empty()) {
          jr["error"] = r.error;
          any_failed = true;
        }
        jrows.push_back(std::move(jr));
      }
      json manifest{{"spec", spec_to_json(grid.base)},
                    {"settings", settings_to_json(sweep_o.settings)},
                    {"seed", 0},
                    {"axis", to_string(grid.axis)}};
      write_output(run_envelope("sweep", manifest, json{{"rows", jrows}}), sweep_o.out);
      if (!csv_out.empty()) {
        std::ofstream f(csv_out);
        if (!f) throw std::runtime_error("cannot write CSV file: " + csv_out);
        write_sweep_csv(rows, grid.axis, f);
      }
      return any_failed ? kExitPartial : kExitOk;
    }
    if (c_search->parsed()) {
      DgdSpec base = make_spec(search_o, c_search);
      if (!c_search->count("--lambda"))
        throw CLI::ValidationError("search requires --lambda");
      const double lam = search_o.lambda;
      base.mode = MatrixMode::Spectral;
      base.cls = SpectralClass::symmetric(lam);
      SearchResult res = random_search(base, lam, n_samples, seed, search_o.settings);

      json results{{"n_samples", n_samples},
                   {"n_accepted", res.n_accepted},
                   {"best_value", res.best_value},
                   {"found", res.best_matrix.has_value()}};
      if (res.best_matrix)
        results["best_matrix"] = matrix_to_json(res.best_matrix->entries);
      json manifest{{"spec", spec_to_json(base)},
                    {"settings", settings_to_json(search_o.settings)},
                    {"seed", seed},
                    {"lambda", lam}};
      write_output(run_envelope("search", manifest, results), search_o.out);
      if (!search_csv.empty()) {
        std::ofstream f(search_csv);
        if (!f) throw std::runtime_error("cannot write CSV file: " + search_csv);
        write_search_csv(res, f);
      }
      return kExitOk;
    }
    if (c_recover->parsed()) {
      std::ifstream f(artifact_in);
      if (!f) throw std::runtime_error("cannot open artifact file: " + artifact_in);
      json art = json::parse(f);
      DgdSpec spec = spec_from_json(art.at("spec"));
      spec.validate();
      DgdBuild build = build_dgd(spec);

      Eigen::MatrixXd gram = matrix_from_json(art.at("gram"));
      Eigen::VectorXd fvals(art.at("fvals").size());
      for (int i = 0; i < fvals.size(); ++i) fvals(i) = art.at("fvals").at(i);
      ReconstructedInstance inst = factor_gram(gram, fvals, rank_tol);
      RecoveredMatrix rec = estimate_worst_matrix(inst, build, spec, rank_tol);

      json results{{"what", matrix_to_json(rec.what.entries)},
                   {"residual", rec.residual},
                   {"x_rank_deficient", rec.x_rank_deficient},
                   {"dimension", inst.dimension},
                   {"membership",
                    {{"member", rec.membership.member},
                     {"max_asymmetry", rec.membership.max_asymmetry},
                     {"max_row_sum_dev", rec.membership.max_row_sum_dev},
                     {"nonnegative", rec.membership.nonnegative}}}};
      if (spec.cls.lam_minus == -spec.cls.lam_plus) {
        ExplicitMatrix w1 = w1_matrix(spec.n_agents, spec.cls.lam_plus);
        ExplicitMatrix proj = project_generalized_doubly_stochastic(rec.what);
        results["w1_comparison"] = {
            {"lambda", spec.cls.lam_plus},
            {"max_abs_diff", (proj.entries - w1.entries).cwiseAbs().maxCoeff()}};
      }
      json manifest{{"spec", spec_to_json(spec)},
                    {"settings", json::object()},
                    {"seed", 0},
                    {"artifact", artifact_in}};
      write_output(run_envelope("recover", manifest, results), recover_out);
      if (!matrix_out.empty()) save_matrix_file(rec.what, matrix_out);
      return kExitOk;
    }
    if (c_theory->parsed()) {
      DgdSpec spec = make_spec(theory_o, c_theory);
      spec.mode = MatrixMode::Spectral;
      if (spec.cls.lam_minus != -spec.cls.lam_plus)
        throw CLI::ValidationError("theory requires a symmetric --lambda range");
      const double lam = spec.cls.lam_plus;
      if (lam >= 1.0)
        throw CLI::ValidationError("theory bound requires lambda < 1");
      const double hh = spec.h > 0.0
                            ? spec.h
                            : spec.alpha() * std::sqrt(static_cast<double>(spec.n_iters));
      const double value =
          scaled_theory_bound(spec.n_iters, lam, spec.radius, spec.bound, hh);
      json manifest{{"spec", spec_to_json(spec)},
                    {"settings", json::object()},
                    {"seed", 0}};
      write_output(
          run_envelope("theory", manifest, json{{"theory_bound", value}, {"h", hh}}),
          theory_o.out);
      return kExitOk;
    }
  } catch (const CLI::ValidationError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::runtime_error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
