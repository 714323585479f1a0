#include "pama/linalg.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pama {

double Rng::normal()
{
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 == 0.0)
    u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t Rng::index(std::uint64_t n)
{
  if (n == 0)
    throw std::invalid_argument("Rng::index requires n > 0");
  // rejection sampling keeps the draw exactly uniform
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = next();
  while (x >= limit)
    x = next();
  return x % n;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt)
{
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng &rng)
{
  Eigen::MatrixXd A(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i)
      A(i, j) = rng.normal();
  return A;
}

Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi,
                               Rng &rng)
{
  Eigen::MatrixXd A(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i)
      A(i, j) = rng.uniform(lo, hi);
  return A;
}

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd &A)
{
  const Eigen::Index k = std::min(A.rows(), A.cols());
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(A.rows(), k);
  const Eigen::MatrixXd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < k; ++j)
    if (R(j, j) < 0.0)
      Q.col(j) *= -1.0;
  return Q;
}

ThinSvd thin_svd(const Eigen::MatrixXd &A, double rel_floor)
{
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success)
    throw std::runtime_error("thin SVD failed to converge");
  ThinSvd out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  if (out.sigma.size() > 0) {
    const double cutoff = rel_floor * out.sigma(0);
    for (Eigen::Index i = 0; i < out.sigma.size(); ++i)
      if (out.sigma(i) <= cutoff)
        out.sigma(i) = 0.0;
  }
  return out;
}

} // namespace pama
