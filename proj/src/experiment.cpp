#include "pama/experiment.hpp"

#include "pama/diagnostics.hpp"
#include "pama/palm.hpp"
#include "pama/pama.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace pama {

namespace {

std::string trim(std::string s)
{
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos)
    return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string &key, const std::string &v)
{
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw std::invalid_argument(fmt::format("config: '{}' expects a number, got '{}'", key, v));
  return out;
}

long long to_int(const std::string &key, const std::string &v)
{
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw std::invalid_argument(fmt::format("config: '{}' expects an integer, got '{}'", key, v));
  return out;
}

bool to_bool(const std::string &key, const std::string &v)
{
  if (v == "true" || v == "1" || v == "yes")
    return true;
  if (v == "false" || v == "0" || v == "no")
    return false;
  throw std::invalid_argument(fmt::format("config: '{}' expects true/false, got '{}'", key, v));
}

std::string_view noise_name(NoiseKind k) { return k == NoiseKind::Logistic ? "logistic" : "laplace"; }

std::string_view solver_name(SolverChoice s)
{
  switch (s) {
  case SolverChoice::Pama:
    return "pama";
  case SolverChoice::Palm:
    return "palm";
  case SolverChoice::Both:
    return "both";
  }
  return "both";
}

} // namespace

ExperimentConfig ExperimentConfig::desk() { return ExperimentConfig{}; }

ExperimentConfig ExperimentConfig::full_scale()
{
  ExperimentConfig c;
  c.n = 2000;
  c.m = 2000;
  c.r_star = 10;
  c.c_lambda = {0.4, 0.8, 1.6, 3.2, 6.4, 12.8};
  c.output = "sweep_full_out";
  return c;
}

void ExperimentConfig::validate() const
{
  if (n <= 0 || m <= 0)
    throw std::invalid_argument("dimensions must be positive");
  if (r_star < 1 || r_star > std::min(n, m))
    throw std::invalid_argument("r_star must lie in [1, min(n, m)]");
  if (rank_multiplier < 1 || r_star * rank_multiplier > std::min(n, m))
    throw std::invalid_argument("rank_multiplier * r_star must lie in [1, min(n, m)]");
  if (!(sample_rate > 0.0 && sample_rate <= 1.0))
    throw std::invalid_argument("sample_rate must lie in (0, 1]");
  if (!(b > 0.0))
    throw std::invalid_argument("b must be positive");
  if (c_lambda.empty())
    throw std::invalid_argument("c_lambda grid is empty");
  for (double c : c_lambda)
    if (!(c > 0.0))
      throw std::invalid_argument("c_lambda values must be positive");
  if (instances < 1)
    throw std::invalid_argument("instances must be >= 1");
  if (threads < 1)
    throw std::invalid_argument("threads must be >= 1");
}

ExperimentConfig ExperimentConfig::parse(std::istream &is)
{
  ExperimentConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(fmt::format("config line {}: expected key = value", lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    if (key == "preset") {
      if (val == "desk")
        c = desk();
      else if (val == "full")
        c = full_scale();
      else
        throw std::invalid_argument(fmt::format("config: unknown preset '{}'", val));
    } else if (key == "n") {
      c.n = to_int(key, val);
    } else if (key == "m") {
      c.m = to_int(key, val);
    } else if (key == "r_star") {
      c.r_star = to_int(key, val);
    } else if (key == "rank_multiplier") {
      c.rank_multiplier = to_int(key, val);
    } else if (key == "sample_rate") {
      c.sample_rate = to_double(key, val);
    } else if (key == "noise") {
      if (val == "logistic")
        c.noise = NoiseKind::Logistic;
      else if (val == "laplace")
        c.noise = NoiseKind::Laplace;
      else
        throw std::invalid_argument(fmt::format("config: unknown noise '{}'", val));
    } else if (key == "b") {
      c.b = to_double(key, val);
    } else if (key == "c_lambda") {
      c.c_lambda.clear();
      std::stringstream ss(val);
      std::string item;
      while (std::getline(ss, item, ','))
        c.c_lambda.push_back(to_double(key, trim(item)));
    } else if (key == "instances") {
      c.instances = static_cast<int>(to_int(key, val));
    } else if (key == "solver") {
      if (val == "pama")
        c.solver = SolverChoice::Pama;
      else if (val == "palm")
        c.solver = SolverChoice::Palm;
      else if (val == "both")
        c.solver = SolverChoice::Both;
      else
        throw std::invalid_argument(fmt::format("config: unknown solver '{}'", val));
    } else if (key == "theta") {
      c.theta = ThetaSpec::parse(val);
    } else if (key == "mu") {
      c.mu = to_double(key, val);
    } else if (key == "max_iter") {
      c.max_iter = static_cast<int>(to_int(key, val));
    } else if (key == "eps1") {
      c.eps1 = to_double(key, val);
    } else if (key == "eps2") {
      c.eps2 = to_double(key, val);
    } else if (key == "eps3") {
      c.eps3 = to_double(key, val);
    } else if (key == "eps4") {
      c.eps4 = to_double(key, val);
    } else if (key == "palm_smooth_only") {
      c.palm_smooth_only = to_bool(key, val);
    } else if (key == "seed") {
      c.seed = static_cast<std::uint64_t>(to_int(key, val));
    } else if (key == "threads") {
      c.threads = static_cast<int>(to_int(key, val));
    } else if (key == "record_time") {
      c.record_time = to_bool(key, val);
    } else if (key == "output") {
      c.output = val;
    } else {
      throw std::invalid_argument(fmt::format("config line {}: unknown key '{}'", lineno, key));
    }
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path &path)
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error(fmt::format("cannot open config '{}'", path.string()));
  return parse(in);
}

std::string ExperimentConfig::to_text() const
{
  std::string grid;
  for (std::size_t i = 0; i < c_lambda.size(); ++i)
    grid += fmt::format("{}{}", i ? "," : "", c_lambda[i]);
  return fmt::format("n = {}\nm = {}\nr_star = {}\nrank_multiplier = {}\nsample_rate = {}\n"
                     "noise = {}\nb = {}\nc_lambda = {}\ninstances = {}\nsolver = {}\n"
                     "theta = {}\nmu = {}\nmax_iter = {}\neps1 = {}\neps2 = {}\neps3 = {}\n"
                     "eps4 = {}\npalm_smooth_only = {}\nseed = {}\nthreads = {}\n"
                     "record_time = {}\noutput = {}\n",
                     n, m, r_star, rank_multiplier, sample_rate, noise_name(noise), b, grid,
                     instances, solver_name(solver), theta.to_string(), mu, max_iter, eps1, eps2,
                     eps3, eps4, palm_smooth_only, seed, threads, record_time, output.string());
}

Eigen::MatrixXd generate_truth(Eigen::Index n, Eigen::Index m, Eigen::Index r_star, Rng &rng)
{
  if (r_star < 1 || r_star > std::min(n, m))
    throw std::invalid_argument("r_star must lie in [1, min(n, m)]");
  const Eigen::MatrixXd left = uniform_matrix(n, r_star, -0.5, 0.5, rng);
  const Eigen::MatrixXd right = uniform_matrix(m, r_star, -0.5, 0.5, rng);
  return left * right.transpose();
}

ObservationSet sample_observations(const Eigen::MatrixXd &truth, double sample_rate,
                                   NoiseKind noise, double b, Rng &rng)
{
  if (!(sample_rate > 0.0 && sample_rate <= 1.0))
    throw std::invalid_argument("sample_rate must lie in (0, 1]");
  const auto n = static_cast<std::uint64_t>(truth.rows());
  const auto m = static_cast<std::uint64_t>(truth.cols());
  const auto count = static_cast<std::size_t>(
      std::llround(sample_rate * static_cast<double>(n) * static_cast<double>(m)));
  const LossKind link =
      noise == NoiseKind::Logistic ? LossKind::OneBitLogistic : LossKind::OneBitLaplace;

  std::vector<Observation> entries;
  entries.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    const auto cell = rng.index(n * m);
    Observation e;
    e.row = static_cast<Eigen::Index>(cell / m);
    e.col = static_cast<Eigen::Index>(cell % m);
    e.sign = rng.uniform() < phi_cdf(link, b, truth(e.row, e.col)) ? 1 : -1;
    entries.push_back(e);
  }
  return ObservationSet(truth.rows(), truth.cols(), std::move(entries));
}

double relative_error(const Eigen::MatrixXd &X, const Eigen::MatrixXd &truth)
{
  const double denom = truth.norm();
  if (denom == 0.0)
    throw std::invalid_argument("relative error undefined for a zero reference");
  return (X - truth).norm() / denom;
}

double lambda_scale(const ObservationSet &obs)
{
  return obs.sign_matrix().colwise().norm().maxCoeff();
}

Problem make_problem(const ExperimentConfig &config, int instance)
{
  const std::uint64_t instance_seed = mix_seed(config.seed, static_cast<std::uint64_t>(instance));
  Rng rng(instance_seed);
  Eigen::MatrixXd truth = generate_truth(config.n, config.m, config.r_star, rng);
  ObservationSet obs = sample_observations(truth, config.sample_rate, config.noise, config.b, rng);
  SmoothLoss loss = config.noise == NoiseKind::Logistic ? SmoothLoss::logistic(std::move(obs))
                                                        : SmoothLoss::laplace(std::move(obs), config.b);
  return Problem{std::move(truth), std::move(loss), mix_seed(instance_seed, 1)};
}

namespace {

struct Job
{
  std::size_t solver_index; // 0 = pama, 1 = palm
  std::size_t grid_index;
  int instance;
};

RunRow run_job(const ExperimentConfig &config, const Problem &problem, const Job &job)
{
  RunRow row;
  row.solver = job.solver_index == 0 ? "pama" : "palm";
  row.c_lambda = config.c_lambda[job.grid_index];
  row.instance = job.instance;
  const double lambda = row.c_lambda * lambda_scale(problem.loss.observations());
  const Eigen::Index rank = config.r_star * config.rank_multiplier;

  try {
    SolveResult res;
    const auto start = std::chrono::steady_clock::now();
    if (job.solver_index == 0) {
      PamaConfig pc;
      pc.lambda = lambda;
      pc.mu = config.mu;
      pc.theta = config.theta;
      pc.rank = rank;
      pc.max_iter = config.max_iter;
      pc.eps1 = config.eps1;
      pc.eps2 = config.eps2;
      pc.seed = problem.init_seed;
      res = run_pama(problem.loss, pc);
    } else {
      PalmConfig pc;
      pc.lambda = lambda;
      pc.mu = config.mu;
      pc.theta = config.theta;
      pc.rank = rank;
      pc.max_iter = config.max_iter;
      pc.eps3 = config.eps3;
      pc.eps4 = config.eps4;
      pc.seed = problem.init_seed;
      pc.smooth_only = config.palm_smooth_only;
      res = run_palm(problem.loss, pc);
    }
    row.time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    row.re = relative_error(res.U * res.V.transpose(), problem.truth);
    row.rank = static_cast<long>(factored_rank(res.U, res.V));
    row.iters = res.iterations;
    row.objective = res.trace.back().objective;
  } catch (const std::exception &e) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.re = nan;
    row.rank = -1;
    row.objective = nan;
    row.error = e.what();
  }
  return row;
}

} // namespace

SweepResult run_sweep(const ExperimentConfig &config)
{
  config.validate();

  std::vector<std::size_t> solvers;
  if (config.solver != SolverChoice::Palm)
    solvers.push_back(0);
  if (config.solver != SolverChoice::Pama)
    solvers.push_back(1);

  std::vector<Job> jobs;
  for (int inst = 0; inst < config.instances; ++inst)
    for (std::size_t s : solvers)
      for (std::size_t g = 0; g < config.c_lambda.size(); ++g)
        jobs.push_back({s, g, inst});

  // Problems are shared by every (solver, c_lambda) cell of an instance.
  std::vector<std::optional<Problem>> problems(static_cast<std::size_t>(config.instances));
  std::vector<std::once_flag> built(problems.size());
  auto problem_for = [&](int inst) -> const Problem & {
    const auto idx = static_cast<std::size_t>(inst);
    std::call_once(built[idx], [&] { problems[idx] = make_problem(config, inst); });
    return *problems[idx];
  };

  std::vector<RunRow> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      rows[j] = run_job(config, problem_for(jobs[j].instance), jobs[j]);
      // free an instance's data once all its jobs are done is not needed at desk scale
    }
  };
  if (config.threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < config.threads; ++t)
      pool.emplace_back(worker);
  }

  std::vector<std::size_t> order(jobs.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Job &x = jobs[a];
    const Job &y = jobs[b];
    return std::tie(x.solver_index, x.grid_index, x.instance) <
           std::tie(y.solver_index, y.grid_index, y.instance);
  });

  SweepResult out;
  for (std::size_t i : order)
    out.runs.push_back(rows[i]);

  for (std::size_t s : solvers) {
    for (std::size_t g = 0; g < config.c_lambda.size(); ++g) {
      SummaryRow sum;
      sum.solver = s == 0 ? "pama" : "palm";
      sum.c_lambda = config.c_lambda[g];
      for (std::size_t i : order) {
        const Job &job = jobs[i];
        const RunRow &row = rows[i];
        if (job.solver_index != s || job.grid_index != g || !row.error.empty())
          continue;
        ++sum.runs;
        sum.re += row.re;
        sum.rank += static_cast<double>(row.rank);
        sum.time_s += row.time_s;
        sum.iters += row.iters;
        sum.objective += row.objective;
      }
      if (sum.runs > 0) {
        const double k = sum.runs;
        sum.re /= k;
        sum.rank /= k;
        sum.time_s /= k;
        sum.iters /= k;
        sum.objective /= k;
      }
      out.summary.push_back(sum);
    }
  }
  return out;
}

void write_runs_csv(std::ostream &os, const std::vector<RunRow> &rows, bool with_time)
{
  os << "solver,c_lambda,instance,re,rank,time_s,iters,objective\n";
  for (const auto &r : rows)
    os << fmt::format("{},{},{},{:.10g},{},{:.6f},{},{:.12g}\n", r.solver, r.c_lambda, r.instance,
                      r.re, r.rank, with_time ? r.time_s : 0.0, r.iters, r.objective);
}

void write_summary_csv(std::ostream &os, const std::vector<SummaryRow> &rows, bool with_time)
{
  os << "solver,c_lambda,runs,re,rank,time_s,iters,objective\n";
  for (const auto &r : rows)
    os << fmt::format("{},{},{},{:.10g},{:.6g},{:.6f},{:.6g},{:.12g}\n", r.solver, r.c_lambda,
                      r.runs, r.re, r.rank, with_time ? r.time_s : 0.0, r.iters, r.objective);
}

void write_manifest(std::ostream &os, const ExperimentConfig &config)
{
  os << "# resolved configuration\n" << config.to_text();
  os << "# each instance redraws M*, the sample and the signs from its own seed;\n"
        "# both solvers start from the same factors within an instance\n";
  for (int inst = 0; inst < config.instances; ++inst) {
    const std::uint64_t s = mix_seed(config.seed, static_cast<std::uint64_t>(inst));
    os << fmt::format("instance {}: data_seed = {} init_seed = {}\n", inst, s, mix_seed(s, 1));
  }
}

void write_sweep(const ExperimentConfig &config, const SweepResult &result)
{
  std::filesystem::create_directories(config.output);
  std::ofstream runs(config.output / "runs.csv");
  write_runs_csv(runs, result.runs, config.record_time);
  std::ofstream summary(config.output / "summary.csv");
  write_summary_csv(summary, result.summary, config.record_time);
  std::ofstream manifest(config.output / "manifest.txt");
  write_manifest(manifest, config);
  for (const auto &r : result.runs)
    if (!r.error.empty())
      manifest << fmt::format("failure: {} c_lambda={} instance={}: {}\n", r.solver, r.c_lambda,
                              r.instance, r.error);
}

} // namespace pama
