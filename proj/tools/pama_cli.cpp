#include "pama/checks.hpp"
#include "pama/diagnostics.hpp"
#include "pama/experiment.hpp"
#include "pama/palm.hpp"
#include "pama/pama.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

namespace fs = std::filesystem;

namespace {

struct SolveOptions
{
  std::string loss = "logistic";
  std::string theta = "theta1";
  std::string solver = "pama";
  double lambda = 1.0;
  std::optional<double> c_lambda;
  double mu = 1e-8;
  double b = 2.0;
  Eigen::Index rank = 0;
  int max_iter = 200;
  double eps1 = 5e-4;
  double eps2 = 1e-3;
  double eps3 = 5e-4;
  double eps4 = 1e-3;
  bool smooth_only = false;
  bool diagnostics = false;
  bool check_invariants = false;
  bool no_time = false;
  std::string observations;
  Eigen::Index n = 100;
  Eigen::Index m = 100;
  Eigen::Index r_star = 3;
  double sample_rate = 0.4;
  std::uint64_t seed = 1;
  std::string output;
};

int run_solve(const SolveOptions &o)
{
  pama::Rng rng(o.seed);
  std::optional<Eigen::MatrixXd> truth;
  std::optional<pama::ObservationSet> obs;

  const bool laplace = o.loss == "laplace";
  if (!o.observations.empty()) {
    std::ifstream in(o.observations);
    if (!in)
      throw std::runtime_error(fmt::format("cannot open '{}'", o.observations));
    obs = pama::ObservationSet::read(in);
  } else {
    truth = pama::generate_truth(o.n, o.m, o.r_star, rng);
    obs = pama::sample_observations(*truth, o.sample_rate,
                                    laplace ? pama::NoiseKind::Laplace : pama::NoiseKind::Logistic,
                                    o.b, rng);
  }

  const double scale = pama::lambda_scale(*obs);
  const double lambda = o.c_lambda ? *o.c_lambda * scale : o.lambda;
  const Eigen::Index rank = o.rank > 0 ? o.rank : 3 * o.r_star;

  std::optional<pama::SmoothLoss> loss;
  if (o.loss == "logistic")
    loss = pama::SmoothLoss::logistic(*obs);
  else if (laplace)
    loss = pama::SmoothLoss::laplace(*obs, o.b);
  else
    loss = pama::SmoothLoss::masked_quadratic(*obs, obs->sign_matrix());

  const pama::ThetaSpec theta = pama::ThetaSpec::parse(o.theta);
  const std::uint64_t init_seed = pama::mix_seed(o.seed, 1);

  std::vector<pama::DiagnosticReport> reports;
  auto diag = [&](const Eigen::MatrixXd &U, const Eigen::MatrixXd &V) {
    reports.push_back(pama::diagnose(*loss, theta, lambda, o.mu, U, V));
  };

  pama::SolveResult res;
  if (o.solver == "pama") {
    pama::PamaConfig pc;
    pc.lambda = lambda;
    pc.mu = o.mu;
    pc.theta = theta;
    pc.rank = rank;
    pc.max_iter = o.max_iter;
    pc.eps1 = o.eps1;
    pc.eps2 = o.eps2;
    pc.seed = init_seed;
    pc.check_invariants = o.check_invariants;
    pama::PamaObserver obs_fn;
    if (o.diagnostics)
      obs_fn = [&](const pama::PamaIterationView &v) { diag(v.state.Ubar, v.state.Vbar); };
    res = pama::run_pama(*loss, pc, obs_fn);
  } else {
    pama::PalmConfig pc;
    pc.lambda = lambda;
    pc.mu = o.mu;
    pc.theta = theta;
    pc.rank = rank;
    pc.max_iter = o.max_iter;
    pc.eps3 = o.eps3;
    pc.eps4 = o.eps4;
    pc.seed = init_seed;
    pc.smooth_only = o.smooth_only;
    pama::PalmObserver obs_fn;
    if (o.diagnostics)
      obs_fn = [&](const pama::PalmIterationView &v) { diag(v.U, v.V); };
    res = pama::run_palm(*loss, pc, obs_fn);
  }
  for (std::size_t i = 0; i < reports.size(); ++i)
    res.trace[i + 1].diagnostics = reports[i];

  std::ostream *trace_os = &std::cout;
  std::ofstream trace_file;
  if (!o.output.empty()) {
    fs::create_directories(o.output);
    trace_file.open(fs::path(o.output) / "trace.csv");
    trace_os = &trace_file;
  }
  pama::write_trace_csv(*trace_os, res.trace, !o.no_time);

  const auto rank_out = pama::factored_rank(res.U, res.V);
  std::string summary = fmt::format("solver={} loss={} theta={} lambda={:.10g} iterations={} "
                                    "objective={:.12g} rank={}",
                                    o.solver, o.loss, theta.to_string(), lambda, res.iterations,
                                    res.trace.back().objective, rank_out);
  if (truth)
    summary += fmt::format(" re={:.10g}", pama::relative_error(res.U * res.V.transpose(), *truth));
  std::cerr << summary << '\n';

  if (!o.output.empty()) {
    std::ofstream manifest(fs::path(o.output) / "manifest.txt");
    fmt::print(manifest,
               "loss = {}\ntheta = {}\nsolver = {}\nlambda = {:.17g}\nlambda_scale = {:.17g}\n"
               "mu = {}\nb = {}\nrank = {}\nmax_iter = {}\neps1 = {}\neps2 = {}\neps3 = {}\n"
               "eps4 = {}\npalm_smooth_only = {}\nseed = {}\ninit_seed = {}\n",
               o.loss, theta.to_string(), o.solver, lambda, scale, o.mu, o.b, rank, o.max_iter,
               o.eps1, o.eps2, o.eps3, o.eps4, o.smooth_only, o.seed, init_seed);
    if (o.observations.empty())
      fmt::print(manifest, "n = {}\nm = {}\nr_star = {}\nsample_rate = {}\n", o.n, o.m, o.r_star,
                 o.sample_rate);
    else
      fmt::print(manifest, "observations = {}\n", o.observations);
    manifest << "# " << summary << '\n';
  }
  return 0;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Low-rank composite factorization solvers and experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<int> sweep_threads;
  bool sweep_smooth_only = false;
  auto *sweep = app.add_subcommand("sweep", "Run a lambda sweep described by a config file");
  sweep->add_option("--config", config_path, "key = value config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--threads", sweep_threads, "Worker threads (overrides the config)");
  sweep->add_flag("--palm-smooth-only", sweep_smooth_only,
                  "PALM blocks take plain gradient steps without the regularizer");

  SolveOptions so;
  auto *solve = app.add_subcommand("solve", "Solve a single problem and print its trace");
  solve->add_option("--loss", so.loss)->check(CLI::IsMember({"logistic", "laplace", "quadratic"}));
  solve->add_option("--theta", so.theta, "theta1..theta5 or theta6(a=..,rho=..)");
  solve->add_option("--solver", so.solver)->check(CLI::IsMember({"pama", "palm"}));
  auto *lam = solve->add_option("--lambda", so.lambda, "Regularization weight");
  solve->add_option("--c-lambda", so.c_lambda, "lambda as a multiple of max_j ||Y_j||")->excludes(lam);
  solve->add_option("--mu", so.mu);
  solve->add_option("--b", so.b, "Laplace scale");
  solve->add_option("--rank", so.rank, "Factor width (default 3 * r-star)");
  solve->add_option("--max-iter", so.max_iter);
  solve->add_option("--eps1", so.eps1);
  solve->add_option("--eps2", so.eps2);
  solve->add_option("--eps3", so.eps3);
  solve->add_option("--eps4", so.eps4);
  solve->add_flag("--palm-smooth-only", so.smooth_only);
  solve->add_flag("--diagnostics", so.diagnostics, "Append diagnostic columns to the trace");
  solve->add_flag("--check-invariants", so.check_invariants, "Abort on a violated PAMA invariant");
  solve->add_flag("--no-time", so.no_time, "Write 0 in the time column");
  solve->add_option("--observations", so.observations, "Observation file (otherwise synthetic)")
      ->check(CLI::ExistingFile);
  solve->add_option("--n", so.n);
  solve->add_option("--m", so.m);
  solve->add_option("--r-star", so.r_star);
  solve->add_option("--sample-rate", so.sample_rate);
  solve->add_option("--seed", so.seed);
  solve->add_option("--output", so.output, "Directory for trace.csv and manifest.txt");

  std::string suite;
  std::uint64_t check_seed = 7;
  auto *check = app.add_subcommand("check", "Run a property suite");
  check->add_option("--suite", suite)->required()->check(CLI::IsMember({"prox", "grad", "descent", "norms"}));
  check->add_option("--seed", check_seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sweep) {
      auto config = pama::ExperimentConfig::from_file(config_path);
      if (sweep_threads)
        config.threads = *sweep_threads;
      if (sweep_smooth_only)
        config.palm_smooth_only = true;
      config.validate();
      const auto result = pama::run_sweep(config);
      pama::write_sweep(config, result);
      pama::write_summary_csv(std::cout, result.summary, config.record_time);
      int failures = 0;
      for (const auto &r : result.runs)
        failures += r.error.empty() ? 0 : 1;
      if (failures > 0)
        std::cerr << failures << " run(s) failed; see manifest.txt\n";
      return 0;
    }
    if (*solve)
      return run_solve(so);
    if (*check) {
      const auto res = pama::run_suite(suite, check_seed);
      for (const auto &line : res.details)
        std::cout << line << '\n';
      fmt::print("suite {}: {} ({:.2f} s)\n", res.name, res.passed ? "passed" : "FAILED", res.seconds);
      return res.passed ? 0 : 1;
    }
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
