#pragma once

#include "pama/loss.hpp"
#include "pama/pama.hpp"
#include "pama/theta.hpp"
#include "pama/trace.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>

namespace pama {

struct PalmConfig
{
  double lambda = 1.0;
  double mu = 1e-8;
  ThetaSpec theta{ThetaKind::Theta1};
  Eigen::Index rank = 1;
  double varrho1 = 5.0; // U-block step inflation during backtracking
  double varrho2 = 5.0; // V-block step inflation during backtracking
  double alpha_min = 1e-10;
  double alpha_max = 1e10;
  int max_iter = 200;
  double eps3 = 5e-4;
  double eps4 = 1e-3;
  std::uint64_t seed = 0;
  int max_backtracks = 100;
  // Drop lambda*vartheta + mu/2 ||.||^2 from the block subproblems and take plain
  // gradient steps on the smooth part alone.
  bool smooth_only = false;

  void validate(Eigen::Index n, Eigen::Index m) const;
};

class LineSearchFailure : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

enum class Block { U, V };

// grad_U F = grad f(U V^T) V and grad_V F = grad f(U V^T)^T U.
Eigen::MatrixXd partial_grad_u(const SmoothLoss &loss, const Eigen::MatrixXd &U,
                               const Eigen::MatrixXd &V);
Eigen::MatrixXd partial_grad_v(const SmoothLoss &loss, const Eigen::MatrixXd &U,
                               const Eigen::MatrixXd &V);

// Barzilai-Borwein curvature ||g - g_prev||_F / ||x - x_prev||_F clamped to
// [alpha_min, alpha_max]. Falls back to `previous` when x == x_prev.
double bb_initial_step(const Eigen::MatrixXd &x_prev, const Eigen::MatrixXd &x,
                       const Eigen::MatrixXd &g_prev, const Eigen::MatrixXd &g, double previous,
                       const PalmConfig &config);

// Exact minimizer over the chosen block of
//   <grad, W - W0> + alpha/2 ||W - W0||^2 + lambda vartheta(W) + mu/2 ||W||^2,
// solved column by column. `grad` is the partial gradient at the current pair.
Eigen::MatrixXd palm_block_update(const Eigen::MatrixXd &current, const Eigen::MatrixXd &grad,
                                  double alpha, const PalmConfig &config);

// Convenience overload computing the partial gradient itself.
Eigen::MatrixXd palm_block_update(const SmoothLoss &loss, const Eigen::MatrixXd &U,
                                  const Eigen::MatrixXd &V, Block side, double alpha,
                                  const PalmConfig &config);

struct PalmIterationView
{
  const Eigen::MatrixXd &U;
  const Eigen::MatrixXd &V;
  const Eigen::MatrixXd &U_prev;
  const Eigen::MatrixXd &V_prev;
  const TraceRecord &record;
  double alpha_u;
  double alpha_v;
  int backtracks_u;
  int backtracks_v;
};

using PalmObserver = std::function<void(const PalmIterationView &)>;

SolveResult run_palm(const SmoothLoss &loss, const PalmConfig &config,
                     const PalmObserver &observer = {});

} // namespace pama
