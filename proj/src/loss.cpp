#include "pama/loss.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace pama {

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z)
{
  if (z > 0.0)
    return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double sigmoid(double z)
{
  if (z >= 0.0)
    return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// -log phi(z) for the Laplace CDF.
double laplace_neg_log_cdf(double b, double z)
{
  if (z < 0.0)
    return std::log(2.0) - z / b;
  return -std::log1p(-0.5 * std::exp(-z / b));
}

// d/dz [-log phi(z)] for the Laplace CDF. Both one-sided limits at 0 equal -1/b.
double laplace_neg_log_cdf_derivative(double b, double z)
{
  if (z < 0.0)
    return -1.0 / b;
  const double e = std::exp(-z / b);
  return -(0.5 * e / b) / (1.0 - 0.5 * e);
}

} // namespace

ObservationSet::ObservationSet(Eigen::Index rows, Eigen::Index cols,
                               std::vector<Observation> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries))
{
  if (rows <= 0 || cols <= 0)
    throw std::invalid_argument("observation set needs positive dimensions");
  for (const auto &e : entries_) {
    if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols)
      throw std::invalid_argument(
          fmt::format("observation ({}, {}) outside {}x{}", e.row, e.col, rows, cols));
    if (e.sign != 1 && e.sign != -1)
      throw std::invalid_argument(fmt::format("observation sign {} is not +-1", e.sign));
  }
}

int ObservationSet::max_multiplicity() const
{
  std::vector<Eigen::Index> keys;
  keys.reserve(entries_.size());
  for (const auto &e : entries_)
    keys.push_back(e.row * cols_ + e.col);
  std::sort(keys.begin(), keys.end());
  int best = 0;
  for (std::size_t i = 0; i < keys.size();) {
    std::size_t j = i;
    while (j < keys.size() && keys[j] == keys[i])
      ++j;
    best = std::max(best, static_cast<int>(j - i));
    i = j;
  }
  return best;
}

Eigen::MatrixXd ObservationSet::sign_matrix() const
{
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(rows_, cols_);
  for (const auto &e : entries_)
    Y(e.row, e.col) = e.sign;
  return Y;
}

void ObservationSet::write(std::ostream &os) const
{
  os << rows_ << ' ' << cols_ << '\n' << entries_.size() << '\n';
  for (const auto &e : entries_)
    os << e.row << ' ' << e.col << ' ' << e.sign << '\n';
}

ObservationSet ObservationSet::read(std::istream &is)
{
  Eigen::Index rows = 0, cols = 0;
  std::size_t count = 0;
  if (!(is >> rows >> cols >> count))
    throw std::runtime_error("observation file: malformed header");
  std::vector<Observation> entries;
  entries.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    Observation e;
    if (!(is >> e.row >> e.col >> e.sign))
      throw std::runtime_error(fmt::format("observation file: truncated at entry {}", t));
    entries.push_back(e);
  }
  return ObservationSet(rows, cols, std::move(entries));
}

double phi_cdf(LossKind kind, double b, double x)
{
  switch (kind) {
  case LossKind::OneBitLogistic:
    return sigmoid(x);
  case LossKind::OneBitLaplace:
    if (!(b > 0.0))
      throw std::invalid_argument("Laplace scale must be positive");
    return x < 0.0 ? 0.5 * std::exp(x / b) : 1.0 - 0.5 * std::exp(-x / b);
  case LossKind::MaskedQuadratic:
    break;
  }
  throw std::invalid_argument("phi_cdf is defined for one-bit losses only");
}

SmoothLoss::SmoothLoss(LossKind kind, ObservationSet obs, double b, std::vector<double> targets)
    : kind_(kind), obs_(std::move(obs)), b_(b), targets_(std::move(targets))
{
  const double count = std::max(1, obs_.max_multiplicity());
  switch (kind_) {
  case LossKind::OneBitLogistic:
    // per-draw curvature sigmoid' <= 1/4
    lipschitz_ = std::max(1.0, count / 4.0);
    break;
  case LossKind::OneBitLaplace:
    lipschitz_ = count * 2.0 / (b_ * b_);
    break;
  case LossKind::MaskedQuadratic:
    lipschitz_ = count;
    break;
  }
}

SmoothLoss SmoothLoss::logistic(ObservationSet obs)
{
  return SmoothLoss(LossKind::OneBitLogistic, std::move(obs), 1.0, {});
}

SmoothLoss SmoothLoss::laplace(ObservationSet obs, double b)
{
  if (!(b > 0.0))
    throw std::invalid_argument("Laplace scale must be positive");
  return SmoothLoss(LossKind::OneBitLaplace, std::move(obs), b, {});
}

SmoothLoss SmoothLoss::masked_quadratic(ObservationSet obs, const Eigen::MatrixXd &target)
{
  if (target.rows() != obs.rows() || target.cols() != obs.cols())
    throw std::invalid_argument("target shape does not match observation set");
  std::vector<double> targets;
  targets.reserve(obs.size());
  for (const auto &e : obs.entries())
    targets.push_back(target(e.row, e.col));
  return SmoothLoss(LossKind::MaskedQuadratic, std::move(obs), 1.0, std::move(targets));
}

double SmoothLoss::term(std::size_t t, double x) const
{
  const int y = obs_.entries()[t].sign;
  switch (kind_) {
  case LossKind::OneBitLogistic:
    // -log sigmoid(y x)
    return softplus(-y * x);
  case LossKind::OneBitLaplace:
    // 1 - phi(x) = phi(-x), so both signs reduce to -log phi(y x)
    return laplace_neg_log_cdf(b_, y * x);
  case LossKind::MaskedQuadratic: {
    const double d = x - targets_[t];
    return 0.5 * d * d;
  }
  }
  return 0.0;
}

double SmoothLoss::term_derivative(std::size_t t, double x) const
{
  const int y = obs_.entries()[t].sign;
  switch (kind_) {
  case LossKind::OneBitLogistic:
    return -y * sigmoid(-y * x);
  case LossKind::OneBitLaplace:
    return y * laplace_neg_log_cdf_derivative(b_, y * x);
  case LossKind::MaskedQuadratic:
    return x - targets_[t];
  }
  return 0.0;
}

double SmoothLoss::value(const Eigen::MatrixXd &X) const
{
  double total = 0.0;
  const auto &entries = obs_.entries();
  for (std::size_t t = 0; t < entries.size(); ++t)
    total += term(t, X(entries[t].row, entries[t].col));
  return total;
}

Eigen::MatrixXd SmoothLoss::gradient(const Eigen::MatrixXd &X) const
{
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(X.rows(), X.cols());
  const auto &entries = obs_.entries();
  for (std::size_t t = 0; t < entries.size(); ++t) {
    const auto &e = entries[t];
    G(e.row, e.col) += term_derivative(t, X(e.row, e.col));
  }
  return G;
}

double SmoothLoss::lipschitz_constant() const { return lipschitz_; }

Eigen::VectorXd SmoothLoss::entries(const Eigen::MatrixXd &U, const Eigen::MatrixXd &V) const
{
  const auto &obs = obs_.entries();
  Eigen::VectorXd x(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t t = 0; t < obs.size(); ++t)
    x(static_cast<Eigen::Index>(t)) = U.row(obs[t].row).dot(V.row(obs[t].col));
  return x;
}

double SmoothLoss::value_on(const Eigen::VectorXd &x) const
{
  double total = 0.0;
  for (std::size_t t = 0; t < obs_.size(); ++t)
    total += term(t, x(static_cast<Eigen::Index>(t)));
  return total;
}

Eigen::VectorXd SmoothLoss::derivative_on(const Eigen::VectorXd &x) const
{
  Eigen::VectorXd d(x.size());
  for (std::size_t t = 0; t < obs_.size(); ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    d(i) = term_derivative(t, x(i));
  }
  return d;
}

Eigen::SparseMatrix<double> SmoothLoss::gradient_sparse(const Eigen::VectorXd &x) const
{
  const Eigen::VectorXd d = derivative_on(x);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(obs_.size());
  const auto &obs = obs_.entries();
  for (std::size_t t = 0; t < obs.size(); ++t)
    triplets.emplace_back(obs[t].row, obs[t].col, d(static_cast<Eigen::Index>(t)));
  Eigen::SparseMatrix<double> G(rows(), cols());
  G.setFromTriplets(triplets.begin(), triplets.end());
  return G;
}

} // namespace pama
