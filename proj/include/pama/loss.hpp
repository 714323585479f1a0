#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace pama {

struct Observation
{
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  int sign = 1; // +1 or -1

  friend bool operator==(const Observation &, const Observation &) = default;
};

// Sampled index set of an n x m matrix with one observed sign per draw.
// Draws are with replacement, so an index may appear several times.
class ObservationSet
{
public:
  ObservationSet(Eigen::Index rows, Eigen::Index cols, std::vector<Observation> entries);

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<Observation> &entries() const { return entries_; }

  // Largest number of times any single index was drawn (0 when empty).
  int max_multiplicity() const;

  // n x m matrix holding the observed sign at sampled indices (last draw wins)
  // and zero elsewhere.
  Eigen::MatrixXd sign_matrix() const;

  // Text format: "n m" / "N" / N lines of "i j y".
  void write(std::ostream &os) const;
  static ObservationSet read(std::istream &is);

  friend bool operator==(const ObservationSet &, const ObservationSet &) = default;

private:
  Eigen::Index rows_;
  Eigen::Index cols_;
  std::vector<Observation> entries_;
};

enum class LossKind { OneBitLogistic, OneBitLaplace, MaskedQuadratic };

// Link function of the one-bit model: logistic sigmoid, or the Laplace(0, b) CDF.
double phi_cdf(LossKind kind, double b, double x);

// Smooth data-fit term f(X) summed over the observation set. Immutable once built.
class SmoothLoss
{
public:
  static SmoothLoss logistic(ObservationSet obs);
  static SmoothLoss laplace(ObservationSet obs, double b);
  // 0.5 * sum over draws of (X_ij - target_ij)^2; observation signs are ignored.
  static SmoothLoss masked_quadratic(ObservationSet obs, const Eigen::MatrixXd &target);

  LossKind kind() const { return kind_; }
  double scale() const { return b_; }
  const ObservationSet &observations() const { return obs_; }
  Eigen::Index rows() const { return obs_.rows(); }
  Eigen::Index cols() const { return obs_.cols(); }

  double value(const Eigen::MatrixXd &X) const;
  Eigen::MatrixXd gradient(const Eigen::MatrixXd &X) const;

  // Lipschitz modulus of the gradient. Logistic: 1; Laplace: 2/b^2; quadratic: 1.
  // Repeated draws stack their curvature, so the value is scaled up when an index
  // is drawn more often than the per-draw curvature bound allows.
  double lipschitz_constant() const;

  // Observation-restricted evaluation: x_t = <U.row(i_t), V.row(j_t)>.
  Eigen::VectorXd entries(const Eigen::MatrixXd &U, const Eigen::MatrixXd &V) const;
  double value_on(const Eigen::VectorXd &x) const;
  // d f / d x_t for each draw.
  Eigen::VectorXd derivative_on(const Eigen::VectorXd &x) const;
  // Gradient matrix assembled from per-draw derivatives; duplicates are summed.
  Eigen::SparseMatrix<double> gradient_sparse(const Eigen::VectorXd &x) const;

private:
  SmoothLoss(LossKind kind, ObservationSet obs, double b, std::vector<double> targets);

  double term(std::size_t t, double x) const;
  double term_derivative(std::size_t t, double x) const;

  LossKind kind_;
  ObservationSet obs_;
  double b_ = 1.0;
  std::vector<double> targets_;
  double lipschitz_ = 1.0;
};

} // namespace pama
