#include "pama/diagnostics.hpp"
#include "pama/experiment.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

using namespace pama;

namespace {

ExperimentConfig tiny_config()
{
  ExperimentConfig c;
  c.n = 20;
  c.m = 16;
  c.r_star = 2;
  c.rank_multiplier = 2;
  c.sample_rate = 0.5;
  c.c_lambda = {0.3, 0.6};
  c.instances = 5;
  c.max_iter = 15;
  c.record_time = false;
  c.seed = 77;
  return c;
}

std::vector<std::string> lines(const std::string &text)
{
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);)
    out.push_back(line);
  return out;
}

} // namespace

TEST_CASE("config parsing")
{
  std::istringstream is("# comment\npreset = desk\nn = 40   # trailing\nm=30\nc_lambda = 0.1, 0.2,0.4\n"
                        "solver = pama\ntheta = theta6(a=3,rho=2)\nnoise = laplace\nrecord_time = false\n");
  const ExperimentConfig c = ExperimentConfig::parse(is);
  CHECK(c.n == 40);
  CHECK(c.m == 30);
  CHECK(c.c_lambda == std::vector<double>{0.1, 0.2, 0.4});
  CHECK(c.solver == SolverChoice::Pama);
  CHECK(c.theta == ThetaSpec::theta6(3.0, 2.0));
  CHECK(c.noise == NoiseKind::Laplace);
  CHECK_FALSE(c.record_time);
  CHECK(c.r_star == ExperimentConfig::desk().r_star);

  std::istringstream round(c.to_text());
  const ExperimentConfig back = ExperimentConfig::parse(round);
  CHECK(back.to_text() == c.to_text());

  std::istringstream unknown("colour = blue\n");
  CHECK_THROWS(ExperimentConfig::parse(unknown));
  std::istringstream malformed("n 40\n");
  CHECK_THROWS(ExperimentConfig::parse(malformed));

  std::istringstream full("preset = full\n");
  const ExperimentConfig p = ExperimentConfig::parse(full);
  CHECK(p.n == 2000);
  CHECK(p.r_star == 10);

  ExperimentConfig bad = tiny_config();
  bad.sample_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("ground truth")
{
  Rng rng(1);
  CHECK(factored_rank(generate_truth(2, 2, 1, rng), Eigen::MatrixXd::Identity(2, 2)) == 1);
  const Eigen::MatrixXd M = generate_truth(30, 20, 4, rng);
  const auto svd = thin_svd(M);
  CHECK(svd.sigma(3) > 0.0);
  CHECK(svd.sigma(4) == 0.0);
  // each entry is a sum of r products of values in [-1/2, 1/2]
  CHECK(M.cwiseAbs().maxCoeff() <= 4 * 0.25);

  Rng a(42), b(42);
  CHECK(generate_truth(9, 7, 3, a) == generate_truth(9, 7, 3, b));
}

TEST_CASE("sampling")
{
  Rng rng(2);
  const ObservationSet obs = sample_observations(Eigen::MatrixXd::Zero(10, 10), 0.4, NoiseKind::Logistic, 2.0, rng);
  CHECK(obs.size() == 40);

  const ObservationSet pos = sample_observations(Eigen::MatrixXd::Constant(5, 5, 1e3), 1.0, NoiseKind::Laplace, 2.0, rng);
  for (const auto &e : pos.entries())
    CHECK(e.sign == 1);

  const ObservationSet fair = sample_observations(Eigen::MatrixXd::Zero(250, 400), 1.0, NoiseKind::Logistic, 2.0, rng);
  REQUIRE(fair.size() == 100000);
  int plus = 0;
  for (const auto &e : fair.entries())
    plus += e.sign > 0 ? 1 : 0;
  CHECK(std::abs(plus / 1e5 - 0.5) <= 0.01);
}

TEST_CASE("relative error and lambda scale")
{
  Rng rng(3);
  const Eigen::MatrixXd M = gaussian_matrix(5, 4, rng);
  CHECK(relative_error(M, M) == 0.0);
  CHECK(relative_error(Eigen::MatrixXd::Zero(5, 4), M) == doctest::Approx(1.0));
  CHECK(relative_error(2.0 * M, M) == doctest::Approx(1.0));
  CHECK_THROWS_AS(relative_error(M, Eigen::MatrixXd::Zero(5, 4)), std::invalid_argument);

  const ObservationSet obs(3, 2, {{0, 0, 1}, {1, 0, -1}, {2, 0, 1}, {0, 1, 1}});
  CHECK(lambda_scale(obs) == doctest::Approx(std::sqrt(3.0)));
}

TEST_CASE("problems are reproducible per instance")
{
  const ExperimentConfig c = tiny_config();
  const Problem a = make_problem(c, 2);
  const Problem b = make_problem(c, 2);
  const Problem other = make_problem(c, 3);
  CHECK(a.truth == b.truth);
  CHECK(a.loss.observations() == b.loss.observations());
  CHECK(a.init_seed == b.init_seed);
  CHECK(a.truth != other.truth);
  CHECK(a.init_seed != other.init_seed);
}

TEST_CASE("sweep tables")
{
  const ExperimentConfig c = tiny_config();
  const SweepResult res = run_sweep(c);
  REQUIRE(res.runs.size() == 2 * 2 * 5);
  REQUIRE(res.summary.size() == 4);

  std::map<std::pair<std::string, double>, std::vector<const RunRow *>> cells;
  for (const auto &r : res.runs) {
    CHECK(r.error.empty());
    cells[{r.solver, r.c_lambda}].push_back(&r);
  }
  CHECK(cells.size() == 4);
  for (const auto &s : res.summary) {
    const auto &rows = cells[{s.solver, s.c_lambda}];
    REQUIRE(rows.size() == 5);
    CHECK(s.runs == 5);
    double re = 0.0, rank = 0.0, iters = 0.0, obj = 0.0;
    for (const RunRow *r : rows) {
      re += r->re;
      rank += static_cast<double>(r->rank);
      iters += r->iters;
      obj += r->objective;
    }
    CHECK(std::abs(s.re - re / 5) <= 1e-12);
    CHECK(std::abs(s.rank - rank / 5) <= 1e-12);
    CHECK(std::abs(s.iters - iters / 5) <= 1e-12);
    CHECK(std::abs(s.objective - obj / 5) <= 1e-12 * std::max(1.0, std::abs(obj)));
  }

  std::ostringstream runs, summary;
  write_runs_csv(runs, res.runs, false);
  write_summary_csv(summary, res.summary, false);
  const auto run_lines = lines(runs.str());
  CHECK(run_lines.front() == "solver,c_lambda,instance,re,rank,time_s,iters,objective");
  CHECK(run_lines.size() == 21);
  CHECK(lines(summary.str()).front() == "solver,c_lambda,runs,re,rank,time_s,iters,objective");

  // a rerun without timing is byte-identical
  std::ostringstream again;
  write_runs_csv(again, run_sweep(c).runs, false);
  CHECK(again.str() == runs.str());
}
