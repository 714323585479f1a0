#include "pama/checks.hpp"

#include "pama/diagnostics.hpp"
#include "pama/experiment.hpp"
#include "pama/linalg.hpp"
#include "pama/loss.hpp"
#include "pama/pama.hpp"
#include "pama/theta.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace pama {

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0)
{
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::vector<ThetaSpec> all_thetas()
{
  return {ThetaSpec(ThetaKind::Theta1), ThetaSpec(ThetaKind::Theta2),
          ThetaSpec(ThetaKind::Theta3), ThetaSpec(ThetaKind::Theta4),
          ThetaSpec(ThetaKind::Theta5), ThetaSpec::theta6(3.7, 1.0)};
}

// Random observation set with every index drawn at most once.
ObservationSet distinct_observations(Eigen::Index n, Eigen::Index m, std::size_t count, Rng &rng)
{
  std::vector<std::uint64_t> cells(static_cast<std::size_t>(n * m));
  std::iota(cells.begin(), cells.end(), std::uint64_t{0});
  for (std::size_t i = cells.size(); i > 1; --i)
    std::swap(cells[i - 1], cells[rng.index(i)]);
  std::vector<Observation> entries;
  for (std::size_t t = 0; t < count && t < cells.size(); ++t)
    entries.push_back({static_cast<Eigen::Index>(cells[t] / m),
                       static_cast<Eigen::Index>(cells[t] % m), rng.uniform() < 0.5 ? -1 : 1});
  return ObservationSet(n, m, std::move(entries));
}

ObservationSet random_observations(Eigen::Index n, Eigen::Index m, std::size_t count, Rng &rng)
{
  const auto cells = static_cast<std::uint64_t>(n * m);
  std::vector<Observation> entries;
  for (std::size_t t = 0; t < count; ++t) {
    const auto c = rng.index(cells);
    entries.push_back({static_cast<Eigen::Index>(c / static_cast<std::uint64_t>(m)),
                       static_cast<Eigen::Index>(c % static_cast<std::uint64_t>(m)),
                       rng.uniform() < 0.5 ? -1 : 1});
  }
  return ObservationSet(n, m, std::move(entries));
}

} // namespace

SuiteResult prox_suite(int samples, int grid, std::uint64_t seed)
{
  if (samples < 1 || grid < 2)
    throw std::invalid_argument("prox suite needs samples >= 1 and grid >= 2");
  const auto t0 = clock_type::now();
  SuiteResult out{"prox", true, {}, 0.0};

  // Grid points x_k = w t_k with w = s + 1 and t_k = k / (grid - 1). The power
  // terms factor as w^p t_k^p and (x - s)^2 expands in t_k and t_k^2.
  const Eigen::ArrayXd t = Eigen::ArrayXd::LinSpaced(grid, 0.0, 1.0);
  const Eigen::ArrayXd sq = t.square();
  Eigen::ArrayXd nonzero = Eigen::ArrayXd::Ones(grid);
  nonzero(0) = 0.0;
  const Eigen::ArrayXd root = t.sqrt();
  const Eigen::ArrayXd two_thirds = t.pow(2.0 / 3.0);
  Eigen::ArrayXd cost(grid);

  for (const ThetaSpec &spec : all_thetas()) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(spec.kind())));
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
      const double nu = std::exp(rng.uniform(std::log(1e-4), std::log(1e2)));
      const double s = rng.uniform(0.0, 10.0);
      const double x = prox_theta_scalar(spec, nu, s);
      const double got = (x - s) * (x - s) / (2.0 * nu) + theta_eval(spec, x);

      const double w = s + 1.0;
      const double c2 = w * w / (2.0 * nu);
      const double c1 = -s * w / nu;
      const double c0 = s * s / (2.0 * nu);
      cost = c2 * sq + c1 * t + c0;
      switch (spec.kind()) {
      case ThetaKind::Theta1:
        cost += nonzero;
        break;
      case ThetaKind::Theta2:
        cost += (w * w) * sq;
        break;
      case ThetaKind::Theta3:
        cost += w * t;
        break;
      case ThetaKind::Theta4:
        cost += std::sqrt(w) * root;
        break;
      case ThetaKind::Theta5:
        cost += std::cbrt(w * w) * two_thirds;
        break;
      case ThetaKind::Theta6:
        for (Eigen::Index k = 0; k < grid; ++k)
          cost(k) += theta_eval(spec, w * t(k));
        break;
      }
      worst = std::max(worst, got - cost.minCoeff());
    }
    const bool ok = worst <= 1e-9;
    out.passed = out.passed && ok;
    out.details.push_back(fmt::format("{}: {} samples, worst cost excess over grid {:.3e} [{}]",
                                      spec.to_string(), samples, worst, ok ? "ok" : "FAIL"));
  }
  out.seconds = seconds_since(t0);
  return out;
}

SuiteResult grad_suite(int instances, std::uint64_t seed)
{
  if (instances < 1)
    throw std::invalid_argument("grad suite needs instances >= 1");
  const auto t0 = clock_type::now();
  SuiteResult out{"grad", true, {}, 0.0};
  constexpr Eigen::Index n = 20;
  constexpr Eigen::Index m = 15;
  constexpr double b = 2.0;

  for (int which = 0; which < 2; ++which) {
    const char *name = which == 0 ? "logistic" : "laplace";
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(which)));
    double worst_fd = 0.0;
    double worst_upper = -std::numeric_limits<double>::infinity();
    bool lipschitz_ok = true;

    for (int inst = 0; inst < instances; ++inst) {
      // finite differences, duplicates allowed
      {
        auto obs = random_observations(n, m, n * m / 2, rng);
        const SmoothLoss loss =
            which == 0 ? SmoothLoss::logistic(std::move(obs)) : SmoothLoss::laplace(std::move(obs), b);
        Eigen::MatrixXd X = 2.0 * gaussian_matrix(n, m, rng);
        const Eigen::MatrixXd G = loss.gradient(X);
        for (Eigen::Index j = 0; j < m; ++j) {
          for (Eigen::Index i = 0; i < n; ++i) {
            const double x0 = X(i, j);
            const double h = 1e-6 * (1.0 + std::abs(x0));
            X(i, j) = x0 + h;
            const double fp = loss.value(X);
            X(i, j) = x0 - h;
            const double fm = loss.value(X);
            X(i, j) = x0;
            const double fd = (fp - fm) / (2.0 * h);
            const double rel = std::abs(fd - G(i, j)) / std::max({1.0, std::abs(fd), std::abs(G(i, j))});
            worst_fd = std::max(worst_fd, rel);
          }
        }
      }
      // quadratic upper bound, every index drawn once
      {
        auto obs = distinct_observations(n, m, n * m / 2, rng);
        const SmoothLoss loss =
            which == 0 ? SmoothLoss::logistic(std::move(obs)) : SmoothLoss::laplace(std::move(obs), b);
        const double L = loss.lipschitz_constant();
        lipschitz_ok = lipschitz_ok && L == (which == 0 ? 1.0 : 2.0 / (b * b));
        const Eigen::MatrixXd X = 3.0 * gaussian_matrix(n, m, rng);
        const double scale = std::pow(10.0, rng.uniform(-3.0, 0.5));
        const Eigen::MatrixXd Y = X + scale * gaussian_matrix(n, m, rng);
        const double fx = loss.value(X);
        const double bound = fx + (loss.gradient(X).array() * (Y - X).array()).sum() +
                             0.5 * L * (Y - X).squaredNorm();
        worst_upper =
            std::max(worst_upper, (loss.value(Y) - bound) / std::max(1.0, std::abs(fx)));
      }
    }
    const bool fd_ok = worst_fd <= 1e-5;
    const bool upper_ok = worst_upper <= 1e-12;
    out.passed = out.passed && fd_ok && upper_ok && lipschitz_ok;
    out.details.push_back(fmt::format("{}: finite differences worst rel err {:.3e} [{}]", name,
                                      worst_fd, fd_ok ? "ok" : "FAIL"));
    out.details.push_back(fmt::format("{}: upper bound worst relative excess {:.3e} [{}]", name,
                                      worst_upper, upper_ok ? "ok" : "FAIL"));
    out.details.push_back(fmt::format("{}: Lipschitz constant on distinct draws [{}]", name,
                                      lipschitz_ok ? "ok" : "FAIL"));
  }
  out.seconds = seconds_since(t0);
  return out;
}

SuiteResult descent_suite(int runs, std::uint64_t seed)
{
  if (runs < 1)
    throw std::invalid_argument("descent suite needs runs >= 1");
  const auto t0 = clock_type::now();
  SuiteResult out{"descent", true, {}, 0.0};

  ExperimentConfig ec;
  ec.n = 60;
  ec.m = 60;
  ec.r_star = 3;
  ec.sample_rate = 0.5;
  ec.seed = seed;
  const ThetaKind kinds[] = {ThetaKind::Theta1, ThetaKind::Theta2, ThetaKind::Theta3};

  for (int run = 0; run < runs; ++run) {
    const Problem problem = make_problem(ec, run);
    PamaConfig pc;
    pc.theta = ThetaSpec(kinds[run % 3]);
    pc.lambda = 0.5 * lambda_scale(problem.loss.observations());
    pc.rank = 9;
    pc.seed = problem.init_seed;
    pc.check_invariants = true;
    std::string line;
    try {
      const SolveResult res = run_pama(problem.loss, pc);
      double worst_rise = 0.0;
      for (std::size_t k = 1; k < res.trace.size(); ++k)
        worst_rise = std::max(worst_rise, res.trace[k].objective - res.trace[k - 1].objective);
      const bool ok = worst_rise <= 1e-8;
      out.passed = out.passed && ok;
      line = fmt::format("run {} {}: {} iterations, largest objective rise {:.3e} [{}]", run,
                         pc.theta.to_string(), res.iterations, worst_rise, ok ? "ok" : "FAIL");
    } catch (const std::exception &e) {
      out.passed = false;
      line = fmt::format("run {} {}: {} [FAIL]", run, pc.theta.to_string(), e.what());
    }
    out.details.push_back(std::move(line));
  }
  out.seconds = seconds_since(t0);
  return out;
}

SuiteResult norms_suite(int matrices, int trials, std::uint64_t seed)
{
  if (matrices < 1 || trials < 1)
    throw std::invalid_argument("norms suite needs matrices >= 1 and trials >= 1");
  const auto t0 = clock_type::now();
  SuiteResult out{"norms", true, {}, 0.0};
  const double ps[] = {0.5, 2.0 / 3.0, 1.0};

  Rng rng(seed);
  int ineq_failures = 0;
  for (int i = 0; i < matrices; ++i) {
    const auto rows = static_cast<Eigen::Index>(2 + rng.index(9));
    const auto cols = static_cast<Eigen::Index>(2 + rng.index(9));
    Eigen::MatrixXd X = gaussian_matrix(rows, cols, rng);
    if (i % 3 == 0) {
      const auto k = static_cast<Eigen::Index>(1 + rng.index(std::min(rows, cols)));
      X = gaussian_matrix(rows, k, rng) * gaussian_matrix(k, cols, rng);
    }
    for (double p : ps)
      if (!schatten_l2p_check(X, p))
        ++ineq_failures;
  }
  out.passed = ineq_failures == 0;
  out.details.push_back(fmt::format("Schatten-p <= column l2,p: {} matrices x 3 exponents, {} failures [{}]",
                                    matrices, ineq_failures, ineq_failures == 0 ? "ok" : "FAIL"));

  constexpr int witnesses = 10;
  for (double p : ps) {
    int bad = 0;
    for (int i = 0; i < witnesses; ++i) {
      const Eigen::MatrixXd X = gaussian_matrix(8, 3, rng) * gaussian_matrix(3, 6, rng);
      const auto check = schatten_factorization_check(X, p, 4, trials, rng.next());
      if (!check.ok())
        ++bad;
    }
    out.passed = out.passed && bad == 0;
    out.details.push_back(fmt::format("balanced witness p = {:.4g}: {} matrices x {} refactorizations, {} failures [{}]",
                                      p, witnesses, trials, bad, bad == 0 ? "ok" : "FAIL"));
  }
  out.seconds = seconds_since(t0);
  return out;
}

SuiteResult run_suite(std::string_view name, std::uint64_t seed)
{
  if (name == "prox")
    return prox_suite(2000, 20000, seed);
  if (name == "grad")
    return grad_suite(100, seed);
  if (name == "descent")
    return descent_suite(6, seed);
  if (name == "norms")
    return norms_suite(1000, 100, seed);
  throw std::invalid_argument(fmt::format("unknown suite '{}'", name));
}

} // namespace pama
