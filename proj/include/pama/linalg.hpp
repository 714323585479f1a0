#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace pama {

// Seedable generator with a fixed output stream on every platform: the raw engine
// is std::mt19937_64 (its sequence is pinned by the standard) and all derived
// draws are computed here rather than through <random> distributions, whose
// algorithms are implementation-defined.
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller; the paired draw is cached.
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n);

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// splitmix64 finalizer; used to derive independent seeds for sub-jobs.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng &rng);
Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi,
                               Rng &rng);

// Thin Q factor of A with the sign convention diag(R) >= 0, so the result is
// independent of the Householder sign choices of the backend.
Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd &A);

struct ThinSvd
{
  Eigen::MatrixXd U;     // rows x k, orthonormal columns
  Eigen::VectorXd sigma; // k, nonincreasing, nonnegative
  Eigen::MatrixXd V;     // cols x k, orthonormal columns
};

// Thin SVD with k = min(rows, cols). Singular values below rel_floor * sigma_max
// are set to exactly zero.
ThinSvd thin_svd(const Eigen::MatrixXd &A, double rel_floor = 1e-14);

} // namespace pama
