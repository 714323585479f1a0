#include "pama/diagnostics.hpp"

#include "pama/linalg.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace pama {

double objective_eval(const SmoothLoss &loss, const ThetaSpec &theta, double lambda, double mu,
                      const Eigen::MatrixXd &U, const Eigen::MatrixXd &V)
{
  const double fit = loss.value_on(loss.entries(U, V));
  const double reg = vartheta_eval(theta, U) + vartheta_eval(theta, V);
  const double ridge = 0.5 * mu * (U.squaredNorm() + V.squaredNorm());
  return fit + lambda * reg + ridge;
}

std::vector<Eigen::Index> nonzero_columns(const Eigen::MatrixXd &W, const RankTolerance &tol)
{
  const Eigen::VectorXd norms = W.colwise().norm().transpose();
  std::vector<Eigen::Index> out;
  if (norms.size() == 0)
    return out;
  const double cutoff = tol.column * norms.maxCoeff();
  for (Eigen::Index j = 0; j < norms.size(); ++j)
    if (norms(j) > cutoff)
      out.push_back(j);
  return out;
}

namespace {

// Zero columns: the subdifferential of theta(||.||) at 0 is only pinned down for
// theta1 (everything is admissible) and theta3 (the closed unit ball).
bool zero_column_certified(const ThetaSpec &theta, double lambda, double grad_norm)
{
  switch (theta.kind()) {
  case ThetaKind::Theta1:
    return true;
  case ThetaKind::Theta3:
    return grad_norm <= lambda * (1.0 + 1e-12);
  default:
    return false;
  }
}

// Accumulates the residual of one factor: grad (n x r) is the smooth partial
// gradient with respect to W.
void side_residual(const ThetaSpec &theta, double lambda, double mu, const Eigen::MatrixXd &W,
                   const Eigen::MatrixXd &grad, const RankTolerance &tol,
                   StationarityResult &acc, double &sum_sq)
{
  const auto support = nonzero_columns(W, tol);
  std::vector<bool> nonzero(static_cast<std::size_t>(W.cols()), false);
  for (auto j : support) {
    nonzero[static_cast<std::size_t>(j)] = true;
    const double norm = W.col(j).norm();
    const Eigen::VectorXd r =
        grad.col(j) + mu * W.col(j) + (lambda * theta_derivative(theta, norm) / norm) * W.col(j);
    sum_sq += r.squaredNorm();
  }
  for (Eigen::Index j = 0; j < W.cols(); ++j)
    if (!nonzero[static_cast<std::size_t>(j)] &&
        !zero_column_certified(theta, lambda, grad.col(j).norm()))
      acc.zero_columns_certified = false;
}

} // namespace

StationarityResult stationarity_residual(const SmoothLoss &loss, const ThetaSpec &theta,
                                         double lambda, double mu, const Eigen::MatrixXd &U,
                                         const Eigen::MatrixXd &V, const RankTolerance &tol)
{
  const Eigen::SparseMatrix<double> G = loss.gradient_sparse(loss.entries(U, V));
  const Eigen::MatrixXd grad_u = G * V;
  const Eigen::MatrixXd grad_v = G.transpose() * U;

  StationarityResult out;
  double sum_sq = 0.0;
  side_residual(theta, lambda, mu, U, grad_u, tol, out, sum_sq);
  side_residual(theta, lambda, mu, V, grad_v, tol, out, sum_sq);
  out.residual = std::sqrt(sum_sq);
  return out;
}

BalanceResult balance_gap(const Eigen::MatrixXd &U, const Eigen::MatrixXd &V,
                          const RankTolerance &tol)
{
  BalanceResult out;
  out.gap = (U.transpose() * U - V.transpose() * V).norm();
  out.same_support = nonzero_columns(U, tol) == nonzero_columns(V, tol);
  return out;
}

double colspace_gap(const Eigen::MatrixXd &A, const Eigen::MatrixXd &B, const RankTolerance &tol)
{
  if (B.size() == 0 || B.norm() == 0.0)
    return A.norm();
  const ThinSvd svd = thin_svd(B, 0.0);
  const double cutoff = tol.sigma * svd.sigma(0);
  Eigen::Index k = 0;
  while (k < svd.sigma.size() && svd.sigma(k) > cutoff)
    ++k;
  const auto basis = svd.U.leftCols(k);
  return (A - basis * (basis.transpose() * A)).norm();
}

Eigen::Index factored_rank(const Eigen::MatrixXd &U, const Eigen::MatrixXd &V,
                           const RankTolerance &tol)
{
  if (U.norm() == 0.0 || V.norm() == 0.0)
    return 0;
  // U V^T = Q_U (R_U R_V^T) Q_V^T, so the spectrum lives in the small core.
  Eigen::HouseholderQR<Eigen::MatrixXd> qu(U);
  Eigen::HouseholderQR<Eigen::MatrixXd> qv(V);
  const Eigen::Index r = U.cols();
  const Eigen::Index ku = std::min(U.rows(), r);
  const Eigen::Index kv = std::min(V.rows(), r);
  const Eigen::MatrixXd Ru = qu.matrixQR().topRows(ku).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rv = qv.matrixQR().topRows(kv).triangularView<Eigen::Upper>();
  const ThinSvd svd = thin_svd(Ru * Rv.transpose(), 0.0);
  const double cutoff = tol.sigma * svd.sigma(0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < svd.sigma.size(); ++i)
    if (svd.sigma(i) > cutoff)
      ++rank;
  return rank;
}

double schatten_p_power(const Eigen::MatrixXd &X, double p)
{
  // Rounding leaves singular values near eps * sigma_max where the exact value
  // is zero; raised to a small power they would no longer be negligible.
  const Eigen::VectorXd sigma = thin_svd(X, RankTolerance{}.sigma).sigma;
  double total = 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) > 0.0)
      total += std::pow(sigma(i), p);
  return total;
}

double column_l2p_power(const Eigen::MatrixXd &X, double p)
{
  double total = 0.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double n = X.col(j).norm();
    if (n > 0.0)
      total += std::pow(n, p);
  }
  return total;
}

bool schatten_l2p_check(const Eigen::MatrixXd &X, double p)
{
  const double lhs = schatten_p_power(X, p);
  const double rhs = column_l2p_power(X, p);
  return lhs <= rhs + 1e-9 * std::max(1.0, rhs);
}

FactorizationCheck schatten_factorization_check(const Eigen::MatrixXd &X, double p,
                                                Eigen::Index d, int trials, std::uint64_t seed)
{
  // The factored functional sums ||U_i||^(2p) over columns; at the balanced SVD
  // witness ||U_i|| = sigma_i^(1/2), so each factor contributes ||X||_{S_p}^p.
  auto factored = [p](const Eigen::MatrixXd &U, const Eigen::MatrixXd &V) {
    return column_l2p_power(U, 2.0 * p) + column_l2p_power(V, 2.0 * p);
  };

  FactorizationCheck out;
  const Eigen::Index k = std::min(X.rows(), X.cols());
  const ThinSvd svd = thin_svd(X, RankTolerance{}.sigma);
  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(X.rows(), d);
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(X.cols(), d);
  const Eigen::Index width = std::min(k, d);
  for (Eigen::Index i = 0; i < width; ++i) {
    const double s = std::sqrt(svd.sigma(i));
    U.col(i) = svd.U.col(i) * s;
    V.col(i) = svd.V.col(i) * s;
  }

  out.witness = factored(U, V);
  out.schatten_twice = 2.0 * schatten_p_power(X, p);
  out.equality_holds =
      std::abs(out.witness - out.schatten_twice) <= 1e-9 * std::max(1.0, out.schatten_twice);

  Rng rng(seed);
  out.min_alternative = std::numeric_limits<double>::infinity();
  out.witness_minimal = true;
  for (int t = 0; t < trials; ++t) {
    Eigen::MatrixXd R = gaussian_matrix(d, d, rng);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(R);
    if (!lu.isInvertible())
      continue;
    const Eigen::MatrixXd Ua = U * R;
    const Eigen::MatrixXd Va = V * lu.inverse().transpose();
    const double value = factored(Ua, Va);
    out.min_alternative = std::min(out.min_alternative, value);
    if (out.witness > value + 1e-9 * std::max(1.0, value))
      out.witness_minimal = false;
  }
  return out;
}

std::string DiagnosticReport::csv_header()
{
  return "diag_objective,stationarity,zero_cols_certified,balance_gap,diag_rank,colspace_gap_max";
}

std::string DiagnosticReport::csv_row() const
{
  double worst = 0.0;
  for (double g : colspace_gaps)
    worst = std::max(worst, g);
  return fmt::format("{:.12g},{:.6e},{},{:.6e},{},{:.6e}", objective, stationarity_residual,
                     zero_columns_certified ? 1 : 0, balance_gap, rank, worst);
}

DiagnosticReport diagnose(const SmoothLoss &loss, const ThetaSpec &theta, double lambda,
                          double mu, const Eigen::MatrixXd &U, const Eigen::MatrixXd &V,
                          const RankTolerance &tol)
{
  DiagnosticReport rep;
  rep.objective = objective_eval(loss, theta, lambda, mu, U, V);
  const auto st = stationarity_residual(loss, theta, lambda, mu, U, V, tol);
  rep.stationarity_residual = st.residual;
  rep.zero_columns_certified = st.zero_columns_certified;
  rep.balance_gap = balance_gap(U, V, tol).gap;
  rep.rank = factored_rank(U, V, tol);
  return rep;
}

} // namespace pama
