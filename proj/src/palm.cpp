#include "pama/palm.hpp"

#include "pama/diagnostics.hpp"
#include "product_norm.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <limits>

namespace pama {

void PalmConfig::validate(Eigen::Index n, Eigen::Index m) const
{
  if (rank < 1 || rank > std::min(n, m))
    throw std::invalid_argument(fmt::format("rank {} outside [1, {}]", rank, std::min(n, m)));
  if (!(lambda >= 0.0) || !(mu >= 0.0))
    throw std::invalid_argument("lambda and mu must be nonnegative");
  if (!(varrho1 > 1.0 && varrho2 > 1.0))
    throw std::invalid_argument("backtracking factors must exceed 1");
  if (!(alpha_min > 0.0 && alpha_min < alpha_max))
    throw std::invalid_argument("need 0 < alpha_min < alpha_max");
}

Eigen::MatrixXd partial_grad_u(const SmoothLoss &loss, const Eigen::MatrixXd &U,
                               const Eigen::MatrixXd &V)
{
  return loss.gradient_sparse(loss.entries(U, V)) * V;
}

Eigen::MatrixXd partial_grad_v(const SmoothLoss &loss, const Eigen::MatrixXd &U,
                               const Eigen::MatrixXd &V)
{
  const auto G = loss.gradient_sparse(loss.entries(U, V));
  return G.transpose() * U;
}

double bb_initial_step(const Eigen::MatrixXd &x_prev, const Eigen::MatrixXd &x,
                       const Eigen::MatrixXd &g_prev, const Eigen::MatrixXd &g, double previous,
                       const PalmConfig &config)
{
  const double dx = (x - x_prev).norm();
  if (dx == 0.0)
    return previous;
  const double q = (g - g_prev).norm() / dx;
  return std::clamp(q, config.alpha_min, config.alpha_max);
}

Eigen::MatrixXd palm_block_update(const Eigen::MatrixXd &current, const Eigen::MatrixXd &grad,
                                  double alpha, const PalmConfig &config)
{
  const Eigen::MatrixXd point = current - grad / alpha;
  if (config.smooth_only)
    return point;
  // alpha/2 ||w - point||^2 + mu/2 ||w||^2 = 1/2 ||gamma w - alpha point / gamma||^2 + const
  const double gamma = std::sqrt(alpha + config.mu);
  Eigen::MatrixXd out(point.rows(), point.cols());
  for (Eigen::Index j = 0; j < point.cols(); ++j) {
    if (config.lambda > 0.0)
      out.col(j) =
          prox_column(config.theta, config.lambda, gamma, point.col(j) * (alpha / gamma));
    else
      out.col(j) = point.col(j) * (alpha / (alpha + config.mu));
  }
  return out;
}

Eigen::MatrixXd palm_block_update(const SmoothLoss &loss, const Eigen::MatrixXd &U,
                                  const Eigen::MatrixXd &V, Block side, double alpha,
                                  const PalmConfig &config)
{
  if (side == Block::U)
    return palm_block_update(U, partial_grad_u(loss, U, V), alpha, config);
  return palm_block_update(V, partial_grad_v(loss, U, V), alpha, config);
}

namespace {

struct BlockOutcome
{
  Eigen::MatrixXd W;
  double alpha;
  int backtracks;
};

// Inflate alpha until the smooth part satisfies F(new) <= F0 + <g, new - W0> + alpha/2 ||new - W0||^2.
template <class SmoothAt>
BlockOutcome backtrack(const Eigen::MatrixXd &W0, const Eigen::MatrixXd &g, double F0, double alpha,
                       double inflate, const PalmConfig &config, SmoothAt smooth_at)
{
  const double slack = 1e-14 * std::max(1.0, std::abs(F0));
  for (int bt = 0;; ++bt) {
    Eigen::MatrixXd W = palm_block_update(W0, g, alpha, config);
    const Eigen::MatrixXd step = W - W0;
    const double model = F0 + (g.array() * step.array()).sum() + 0.5 * alpha * step.squaredNorm();
    if (smooth_at(W) <= model + slack)
      return {std::move(W), alpha, bt};
    if (bt >= config.max_backtracks)
      throw LineSearchFailure(fmt::format(
          "line search exceeded {} inflations (alpha = {:.3g}); gradient is inconsistent",
          config.max_backtracks, alpha));
    alpha *= inflate;
  }
}

} // namespace

SolveResult run_palm(const SmoothLoss &loss, const PalmConfig &config, const PalmObserver &observer)
{
  const Eigen::Index n = loss.rows();
  const Eigen::Index m = loss.cols();
  config.validate(n, m);

  auto [U, V] = initial_factors(n, m, config.rank, config.seed);
  auto objective = [&](const Eigen::MatrixXd &A, const Eigen::MatrixXd &B) {
    return objective_eval(loss, config.theta, config.lambda, config.mu, A, B);
  };

  SolveResult result;
  TraceRecord first;
  first.objective = objective(U, V);
  first.objective_hat = first.objective;
  first.rank = static_cast<long>(factored_rank(U, V));
  result.trace.push_back(first);

  double alpha_u = std::clamp(1.0, config.alpha_min, config.alpha_max);
  double alpha_v = alpha_u;
  Eigen::MatrixXd U_prev, V_prev;

  using clock = std::chrono::steady_clock;
  const auto start = clock::now();

  while (!should_stop(result.trace, config.max_iter, config.eps3, config.eps4)) {
    const int k = static_cast<int>(result.trace.size()) - 1;

    // U block at (U^k, V^k)
    const Eigen::VectorXd x0 = loss.entries(U, V);
    const double F0 = loss.value_on(x0);
    const auto G0 = loss.gradient_sparse(x0);
    const Eigen::MatrixXd gU = G0 * V;
    const Eigen::MatrixXd gV_here = G0.transpose() * U;
    if (k >= 1) {
      alpha_u = bb_initial_step(U_prev, U, partial_grad_u(loss, U_prev, V), gU, alpha_u, config);
      alpha_v = bb_initial_step(V_prev, V, partial_grad_v(loss, U, V_prev), gV_here, alpha_v,
                                config);
    }
    const double alpha_u0 = alpha_u;
    const double alpha_v0 = alpha_v;

    auto ub = backtrack(U, gU, F0, alpha_u, config.varrho1, config,
                        [&](const Eigen::MatrixXd &W) { return loss.value_on(loss.entries(W, V)); });
    Eigen::MatrixXd U_next = std::move(ub.W);
    alpha_u = ub.alpha;

    // V block at (U^{k+1}, V^k)
    const Eigen::VectorXd x1 = loss.entries(U_next, V);
    const double F1 = loss.value_on(x1);
    const Eigen::MatrixXd gV = loss.gradient_sparse(x1).transpose() * U_next;
    auto vb = backtrack(V, gV, F1, alpha_v, config.varrho2, config, [&](const Eigen::MatrixXd &W) {
      return loss.value_on(loss.entries(U_next, W));
    });
    Eigen::MatrixXd V_next = std::move(vb.W);
    alpha_v = vb.alpha;

    TraceRecord rec;
    rec.k = k + 1;
    rec.objective_hat = objective(U_next, V);
    rec.objective = objective(U_next, V_next);
    rec.step_u = (U_next - U).norm();
    rec.step_v = (V_next - V).norm();
    const double diff = product_diff_norm(U_next, V_next, U, V);
    const double scale = product_norm(U_next, V_next);
    rec.rel_change = scale > 0.0 ? diff / scale
                                 : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    rec.rank = static_cast<long>(factored_rank(U_next, V_next));
    rec.backtracks = ub.backtracks + vb.backtracks;
    rec.time_s = std::chrono::duration<double>(clock::now() - start).count();

    U_prev = std::move(U);
    V_prev = std::move(V);
    U = std::move(U_next);
    V = std::move(V_next);
    result.trace.push_back(rec);

    if (observer)
      observer(PalmIterationView{U, V, U_prev, V_prev, result.trace.back(), alpha_u0, alpha_v0,
                                 ub.backtracks, vb.backtracks});
  }

  result.U = std::move(U);
  result.V = std::move(V);
  result.iterations = static_cast<int>(result.trace.size()) - 1;
  return result;
}

} // namespace pama
