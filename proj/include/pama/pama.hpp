#pragma once

#include "pama/diagnostics.hpp"
#include "pama/loss.hpp"
#include "pama/theta.hpp"
#include "pama/trace.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

namespace pama {

// How the smooth loss is evaluated inside a step: on dense n x m products, or only
// on the observed entries. Auto picks Dense while n*m stays under dense_limit.
enum class EvalPath { Auto, Dense, Observed };

struct PamaConfig
{
  double lambda = 1.0;
  double mu = 1e-8;
  ThetaSpec theta{ThetaKind::Theta1};
  Eigen::Index rank = 1;
  double gamma1_0 = 1e-2;
  double gamma2_0 = 1e-2;
  double varrho = 0.8;
  double gamma1_min = 1e-8;
  double gamma2_min = 1e-8;
  int max_iter = 200;
  double eps1 = 5e-4;
  double eps2 = 1e-3;
  std::uint64_t seed = 0;
  EvalPath path = EvalPath::Auto;
  std::size_t dense_limit = std::size_t{1} << 22;
  // Verify the per-iteration descent chain and factorization identities; a
  // violation throws InvariantViolation.
  bool check_invariants = false;

  void validate(Eigen::Index n, Eigen::Index m) const;
};

class InvariantViolation : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Iterate of the majorized alternating scheme. Hat quantities come from the
// U-side correction, bar quantities from the V-side correction:
//   Uhat = Phat Dhat, Vhat = Pbar Qhat Dhat, Ubar = Phat Qbar Dbar, Vbar = Pbar Dbar.
struct PamaState
{
  int k = 0;
  Eigen::MatrixXd U, V;       // raw block minimizers U^k, V^k
  Eigen::MatrixXd Uhat, Vhat; // n x r, m x r
  Eigen::MatrixXd Ubar, Vbar;
  Eigen::MatrixXd Phat;       // n x r, orthonormal columns
  Eigen::MatrixXd Pbar;       // m x r, orthonormal columns
  Eigen::MatrixXd Qhat, Qbar; // r x r orthogonal
  Eigen::VectorXd Dhat, Dbar; // nonnegative, nonincreasing
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  // Dense products Xhat = Uhat Vhat^T and Xbar = Ubar Vbar^T (dense path only).
  std::optional<Eigen::MatrixXd> Xhat, Xbar;

  void save(std::ostream &os) const;
  static PamaState load(std::istream &is);
};

// Shared starting point (orth(randn(n, r)), orth(randn(m, r))) for a seed.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> initial_factors(Eigen::Index n, Eigen::Index m,
                                                            Eigen::Index r, std::uint64_t seed);

PamaState init_state(Eigen::Index n, Eigen::Index m, const PamaConfig &config);

bool uses_dense_path(Eigen::Index n, Eigen::Index m, const PamaConfig &config);

// Step 1: exact columnwise minimizer of the proximal majorization in U.
Eigen::MatrixXd u_step(const PamaState &state, const SmoothLoss &loss, const PamaConfig &config);
// Step 2: thin SVD of U_new Dbar; refreshes Phat, Dhat, Qhat, Uhat, Vhat, Xhat.
void subspace_correct_u(const Eigen::MatrixXd &U_new, PamaState &state, bool dense);
// Step 3: exact columnwise minimizer of the proximal majorization in V.
Eigen::MatrixXd v_step(const PamaState &state, const SmoothLoss &loss, const PamaConfig &config);
// Step 4: thin SVD of V_new Dhat; refreshes Pbar, Dbar, Qbar, Ubar, Vbar, Xbar.
void subspace_correct_v(const Eigen::MatrixXd &V_new, PamaState &state, bool dense);
// Step 5.
void decay_gammas(PamaState &state, const PamaConfig &config);

// Stopping test on the trace (last record is the current iterate).
bool should_stop(const std::vector<TraceRecord> &history, int max_iter, double eps1,
                 double eps2);

// Everything an observer may inspect after iteration k -> k+1.
struct PamaIterationView
{
  const PamaState &state;            // already advanced to k+1
  const Eigen::MatrixXd &Ubar_prev;  // Ubar^k
  const Eigen::MatrixXd &Vbar_prev;  // Vbar^k
  const TraceRecord &record;
  double gamma_min;
};

using PamaObserver = std::function<void(const PamaIterationView &)>;

struct SolveResult
{
  Eigen::MatrixXd U;
  Eigen::MatrixXd V;
  std::vector<TraceRecord> trace;
  int iterations = 0;
};

SolveResult run_pama(const SmoothLoss &loss, const PamaConfig &config,
                     const PamaObserver &observer = {});

} // namespace pama
