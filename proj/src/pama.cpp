#include "pama/pama.hpp"

#include "pama/linalg.hpp"
#include "product_norm.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

namespace pama {

void PamaConfig::validate(Eigen::Index n, Eigen::Index m) const
{
  if (rank < 1 || rank > std::min(n, m))
    throw std::invalid_argument(
        fmt::format("rank {} outside [1, {}]", rank, std::min(n, m)));
  if (!(lambda > 0.0))
    throw std::invalid_argument("lambda must be positive");
  if (!(mu > 0.0))
    throw std::invalid_argument("mu must be positive");
  if (!(varrho > 0.0 && varrho < 1.0))
    throw std::invalid_argument("varrho must lie in (0, 1)");
  if (!(gamma1_0 > 0.0 && gamma2_0 > 0.0 && gamma1_min > 0.0 && gamma2_min > 0.0))
    throw std::invalid_argument("proximal parameters must be positive");
  if (max_iter < 0)
    throw std::invalid_argument("max_iter must be nonnegative");
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> initial_factors(Eigen::Index n, Eigen::Index m,
                                                            Eigen::Index r, std::uint64_t seed)
{
  Rng rng(seed);
  Eigen::MatrixXd U = orthonormalize(gaussian_matrix(n, r, rng));
  Eigen::MatrixXd V = orthonormalize(gaussian_matrix(m, r, rng));
  return {std::move(U), std::move(V)};
}

bool uses_dense_path(Eigen::Index n, Eigen::Index m, const PamaConfig &config)
{
  switch (config.path) {
  case EvalPath::Dense:
    return true;
  case EvalPath::Observed:
    return false;
  case EvalPath::Auto:
    break;
  }
  return static_cast<std::size_t>(n) * static_cast<std::size_t>(m) <= config.dense_limit;
}

PamaState init_state(Eigen::Index n, Eigen::Index m, const PamaConfig &config)
{
  config.validate(n, m);
  const Eigen::Index r = config.rank;
  auto [P0, Pbar0] = initial_factors(n, m, r, config.seed);

  PamaState s;
  s.k = 0;
  s.Phat = std::move(P0);
  s.Pbar = std::move(Pbar0);
  s.Qhat = Eigen::MatrixXd::Identity(r, r);
  s.Qbar = Eigen::MatrixXd::Identity(r, r);
  s.Dhat = Eigen::VectorXd::Ones(r);
  s.Dbar = Eigen::VectorXd::Ones(r);
  s.Ubar = s.Phat;
  s.Vbar = s.Pbar;
  s.Uhat = s.Ubar;
  s.Vhat = s.Vbar;
  s.U = s.Ubar;
  s.V = s.Vbar;
  s.gamma1 = config.gamma1_0;
  s.gamma2 = config.gamma2_0;
  if (uses_dense_path(n, m, config)) {
    s.Xbar = s.Ubar * s.Vbar.transpose();
    s.Xhat = s.Xbar;
  }
  return s;
}

Eigen::MatrixXd u_step(const PamaState &state, const SmoothLoss &loss, const PamaConfig &config)
{
  const double L = loss.lipschitz_constant();
  const Eigen::Index r = state.Dbar.size();

  // L * Zbar * Pbar with Zbar = Xbar - grad f(Xbar) / L
  Eigen::MatrixXd LZP;
  if (state.Xbar) {
    LZP = L * (*state.Xbar * state.Pbar) - loss.gradient(*state.Xbar) * state.Pbar;
  } else {
    const auto grad = loss.gradient_sparse(loss.entries(state.Ubar, state.Vbar));
    LZP = L * (state.Ubar * (state.Vbar.transpose() * state.Pbar)) - grad * state.Pbar;
  }

  const Eigen::MatrixXd B = LZP + state.gamma1 * (state.Phat * state.Qbar);
  Eigen::MatrixXd U_new(B.rows(), r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const double d = state.Dbar(i);
    const double lam = std::sqrt(L * d * d + config.mu + state.gamma1);
    U_new.col(i) = prox_column(config.theta, config.lambda, lam, B.col(i) * (d / lam));
  }
  return U_new;
}

void subspace_correct_u(const Eigen::MatrixXd &U_new, PamaState &state, bool dense)
{
  const ThinSvd svd = thin_svd(U_new * state.Dbar.asDiagonal());
  state.U = U_new;
  state.Phat = svd.U;
  state.Qhat = svd.V;
  state.Dhat = svd.sigma.cwiseSqrt();
  state.Uhat = state.Phat * state.Dhat.asDiagonal();
  state.Vhat = state.Pbar * state.Qhat * state.Dhat.asDiagonal();
  if (dense)
    state.Xhat = state.Uhat * state.Vhat.transpose();
  else
    state.Xhat.reset();
}

Eigen::MatrixXd v_step(const PamaState &state, const SmoothLoss &loss, const PamaConfig &config)
{
  const double L = loss.lipschitz_constant();
  const Eigen::Index r = state.Dhat.size();

  // L * Zhat^T * Phat with Zhat = Xhat - grad f(Xhat) / L
  Eigen::MatrixXd LZtP;
  if (state.Xhat) {
    LZtP = L * (state.Xhat->transpose() * state.Phat) -
           loss.gradient(*state.Xhat).transpose() * state.Phat;
  } else {
    const auto grad = loss.gradient_sparse(loss.entries(state.Uhat, state.Vhat));
    LZtP = L * (state.Vhat * (state.Uhat.transpose() * state.Phat)) -
           Eigen::MatrixXd(grad.transpose() * state.Phat);
  }

  const Eigen::MatrixXd B = LZtP + state.gamma2 * (state.Pbar * state.Qhat);
  Eigen::MatrixXd V_new(B.rows(), r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const double d = state.Dhat(i);
    const double delta = std::sqrt(L * d * d + config.mu + state.gamma2);
    V_new.col(i) = prox_column(config.theta, config.lambda, delta, B.col(i) * (d / delta));
  }
  return V_new;
}

void subspace_correct_v(const Eigen::MatrixXd &V_new, PamaState &state, bool dense)
{
  const ThinSvd svd = thin_svd(V_new * state.Dhat.asDiagonal());
  state.V = V_new;
  state.Pbar = svd.U;
  state.Qbar = svd.V;
  state.Dbar = svd.sigma.cwiseSqrt();
  state.Ubar = state.Phat * state.Qbar * state.Dbar.asDiagonal();
  state.Vbar = state.Pbar * state.Dbar.asDiagonal();
  if (dense)
    state.Xbar = state.Ubar * state.Vbar.transpose();
  else
    state.Xbar.reset();
}

void decay_gammas(PamaState &state, const PamaConfig &config)
{
  state.gamma1 = std::max(config.gamma1_min, config.varrho * state.gamma1);
  state.gamma2 = std::max(config.gamma2_min, config.varrho * state.gamma2);
}

bool should_stop(const std::vector<TraceRecord> &history, int max_iter, double eps1,
                 double eps2)
{
  if (history.empty())
    return false;
  const TraceRecord &cur = history.back();
  if (cur.k > max_iter)
    return true;
  if (cur.k >= 1 && cur.rel_change <= eps1)
    return true;
  constexpr std::size_t lag = 9;
  if (cur.k >= static_cast<int>(lag) && history.size() > lag) {
    double worst = 0.0;
    for (std::size_t i = 1; i <= lag; ++i) {
      const double prev = history[history.size() - 1 - i].objective;
      worst = std::max(worst, std::abs(cur.objective - prev));
    }
    if (worst / std::max(1.0, cur.objective) <= eps2)
      return true;
  }
  return false;
}

SolveResult run_pama(const SmoothLoss &loss, const PamaConfig &config, const PamaObserver &observer)
{
  const Eigen::Index n = loss.rows();
  const Eigen::Index m = loss.cols();
  PamaState state = init_state(n, m, config);
  const bool dense = uses_dense_path(n, m, config);
  const double gamma_min = std::min(config.gamma1_min, config.gamma2_min);

  auto objective = [&](const Eigen::MatrixXd &U, const Eigen::MatrixXd &V) {
    return objective_eval(loss, config.theta, config.lambda, config.mu, U, V);
  };

  SolveResult result;
  TraceRecord first;
  first.k = 0;
  first.objective = objective(state.Ubar, state.Vbar);
  first.objective_hat = first.objective;
  first.rank = static_cast<long>(nonzero_columns(state.Ubar).size());
  result.trace.push_back(first);

  using clock = std::chrono::steady_clock;
  const auto start = clock::now();

  while (!should_stop(result.trace, config.max_iter, config.eps1, config.eps2)) {
    const Eigen::MatrixXd Ubar_prev = state.Ubar;
    const Eigen::MatrixXd Vbar_prev = state.Vbar;
    const double obj_prev = result.trace.back().objective;

    const Eigen::MatrixXd U_new = u_step(state, loss, config);
    subspace_correct_u(U_new, state, dense);
    const double obj_hat = objective(state.Uhat, state.Vhat);

    const Eigen::MatrixXd V_new = v_step(state, loss, config);
    subspace_correct_v(V_new, state, dense);
    const double obj = objective(state.Ubar, state.Vbar);

    TraceRecord rec;
    rec.k = state.k + 1;
    rec.objective = obj;
    rec.objective_hat = obj_hat;
    rec.step_u = (U_new - Ubar_prev).norm();
    rec.step_v = (V_new - state.Vhat).norm();
    const double diff = state.Xbar && Ubar_prev.size() > 0
                            ? (*state.Xbar - Ubar_prev * Vbar_prev.transpose()).norm()
                            : product_diff_norm(state.Ubar, state.Vbar, Ubar_prev, Vbar_prev);
    const double scale = state.Xbar ? state.Xbar->norm() : product_norm(state.Ubar, state.Vbar);
    rec.rel_change = scale > 0.0 ? diff / scale
                                 : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    rec.rank = static_cast<long>(nonzero_columns(state.Ubar).size());
    rec.time_s = std::chrono::duration<double>(clock::now() - start).count();

    if (config.check_invariants) {
      constexpr double tol = 1e-8;
      const double mu2 = 0.5 * gamma_min * rec.step_u * rec.step_u;
      const double mv2 = 0.5 * gamma_min * rec.step_v * rec.step_v;
      if (obj_prev < obj_hat + mu2 - tol)
        throw InvariantViolation(fmt::format(
            "iteration {}: U-block descent failed ({:.17g} < {:.17g} + {:.3g})", rec.k,
            obj_prev, obj_hat, mu2));
      if (obj_hat + mu2 < obj + mu2 + mv2 - tol)
        throw InvariantViolation(fmt::format(
            "iteration {}: V-block descent failed ({:.17g} < {:.17g} + {:.3g})", rec.k,
            obj_hat, obj, mv2));
      const double id_u = product_diff_norm(state.Uhat, state.Vhat, U_new, Vbar_prev);
      const double id_v = product_diff_norm(state.Ubar, state.Vbar, state.Uhat, V_new);
      const double nx_hat = product_norm(state.Uhat, state.Vhat);
      const double nx_bar = product_norm(state.Ubar, state.Vbar);
      if (id_u > 1e-10 * (1.0 + nx_hat) || id_v > 1e-10 * (1.0 + nx_bar))
        throw InvariantViolation(fmt::format(
            "iteration {}: factorization identity off by {:.3g} / {:.3g}", rec.k, id_u, id_v));
      const Eigen::MatrixXd gram = state.Ubar.transpose() * state.Ubar;
      const double bal = (gram - state.Vbar.transpose() * state.Vbar).norm();
      if (bal > 1e-8 * (1.0 + gram.norm()))
        throw InvariantViolation(
            fmt::format("iteration {}: balance gap {:.3g}", rec.k, bal));
    }

    decay_gammas(state, config);
    state.k += 1;
    result.trace.push_back(rec);

    if (observer)
      observer(PamaIterationView{state, Ubar_prev, Vbar_prev, result.trace.back(), gamma_min});
  }

  result.U = state.Ubar;
  result.V = state.Vbar;
  result.iterations = state.k;
  return result;
}

// Checkpoint layout: 8-byte magic, u32 version, i64 k, f64 gamma1, f64 gamma2,
// then each matrix as (i64 rows, i64 cols, rows*cols f64 column-major), with the
// two optional caches prefixed by a presence byte.
namespace {

constexpr char kMagic[8] = {'P', 'A', 'M', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T> void put(std::ostream &os, const T &v)
{
  os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <class T> T get(std::istream &is)
{
  T v{};
  if (!is.read(reinterpret_cast<char *>(&v), sizeof(T)))
    throw std::runtime_error("checkpoint truncated");
  return v;
}

void put_matrix(std::ostream &os, const Eigen::MatrixXd &M)
{
  put<std::int64_t>(os, M.rows());
  put<std::int64_t>(os, M.cols());
  os.write(reinterpret_cast<const char *>(M.data()),
           static_cast<std::streamsize>(sizeof(double) * M.size()));
}

Eigen::MatrixXd get_matrix(std::istream &is)
{
  const auto rows = get<std::int64_t>(is);
  const auto cols = get<std::int64_t>(is);
  if (rows < 0 || cols < 0)
    throw std::runtime_error("checkpoint has negative matrix shape");
  Eigen::MatrixXd M(rows, cols);
  if (!is.read(reinterpret_cast<char *>(M.data()),
               static_cast<std::streamsize>(sizeof(double) * M.size())))
    throw std::runtime_error("checkpoint truncated");
  return M;
}

} // namespace

void PamaState::save(std::ostream &os) const
{
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kVersion);
  put<std::int64_t>(os, k);
  put<double>(os, gamma1);
  put<double>(os, gamma2);
  for (const Eigen::MatrixXd *M : {&U, &V, &Uhat, &Vhat, &Ubar, &Vbar, &Phat, &Pbar, &Qhat, &Qbar})
    put_matrix(os, *M);
  put_matrix(os, Dhat);
  put_matrix(os, Dbar);
  for (const auto *cache : {&Xhat, &Xbar}) {
    put<std::uint8_t>(os, cache->has_value() ? 1 : 0);
    if (cache->has_value())
      put_matrix(os, **cache);
  }
}

PamaState PamaState::load(std::istream &is)
{
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || !std::equal(magic, magic + 8, kMagic))
    throw std::runtime_error("not a PAMA checkpoint");
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion)
    throw std::runtime_error(fmt::format("unsupported checkpoint version {}", version));
  PamaState s;
  s.k = static_cast<int>(get<std::int64_t>(is));
  s.gamma1 = get<double>(is);
  s.gamma2 = get<double>(is);
  for (Eigen::MatrixXd *M :
       {&s.U, &s.V, &s.Uhat, &s.Vhat, &s.Ubar, &s.Vbar, &s.Phat, &s.Pbar, &s.Qhat, &s.Qbar})
    *M = get_matrix(is);
  s.Dhat = get_matrix(is);
  s.Dbar = get_matrix(is);
  for (auto *cache : {&s.Xhat, &s.Xbar})
    if (get<std::uint8_t>(is) != 0)
      *cache = get_matrix(is);
  return s;
}

} // namespace pama
