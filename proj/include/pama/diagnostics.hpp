#pragma once

#include "pama/loss.hpp"
#include "pama/theta.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace pama {

// Thresholds used when deciding that a column or a singular value is zero.
struct RankTolerance
{
  double column = 1e-10; // relative to the largest column norm
  double sigma = 1e-12;  // relative to the largest singular value
};

// f(UV^T) + lambda * sum_i [theta(||U_i||) + theta(||V_i||)] + mu/2 (||U||_F^2 + ||V||_F^2)
double objective_eval(const SmoothLoss &loss, const ThetaSpec &theta, double lambda, double mu,
                      const Eigen::MatrixXd &U, const Eigen::MatrixXd &V);

struct StationarityResult
{
  double residual = 0.0;
  // False when some zero column could not be certified against the set
  // union_{y in d theta(0)} d(y ||.||)(0) for the given theta.
  bool zero_columns_certified = true;
};

// Distance from 0 to the limiting subdifferential of the objective at (U, V),
// measured over nonzero columns, plus the zero-column certificate.
StationarityResult stationarity_residual(const SmoothLoss &loss, const ThetaSpec &theta,
                                         double lambda, double mu, const Eigen::MatrixXd &U,
                                         const Eigen::MatrixXd &V,
                                         const RankTolerance &tol = {});

struct BalanceResult
{
  double gap = 0.0;            // ||U^T U - V^T V||_F
  bool same_support = true;    // nonzero column index sets of U and V agree
};

BalanceResult balance_gap(const Eigen::MatrixXd &U, const Eigen::MatrixXd &V,
                          const RankTolerance &tol = {});

// ||(I - Pi_col(B)) A||_F; zero iff col(A) is contained in col(B) up to rounding.
double colspace_gap(const Eigen::MatrixXd &A, const Eigen::MatrixXd &B,
                    const RankTolerance &tol = {});

// Indices j with ||W_j|| > tol.column * max_j ||W_j||.
std::vector<Eigen::Index> nonzero_columns(const Eigen::MatrixXd &W,
                                          const RankTolerance &tol = {});

// Numerical rank of U V^T computed from the r x r core R_U R_V^T.
Eigen::Index factored_rank(const Eigen::MatrixXd &U, const Eigen::MatrixXd &V,
                           const RankTolerance &tol = {});

// ||X||_{S_p}^p = sum sigma_i^p and ||X||_{2,p}^p = sum ||X_j||^p.
double schatten_p_power(const Eigen::MatrixXd &X, double p);
double column_l2p_power(const Eigen::MatrixXd &X, double p);

// ||X||_{S_p}^p <= ||X||_{2,p}^p within 1e-9 relative.
bool schatten_l2p_check(const Eigen::MatrixXd &X, double p);

struct FactorizationCheck
{
  double witness = 0.0;          // ||U||_{2,p}^{2p} + ||V||_{2,p}^{2p} at the SVD witness
  double schatten_twice = 0.0;   // 2 ||X||_{S_p}^p
  double min_alternative = 0.0;  // smallest value over the random refactorizations
  bool equality_holds = false;
  bool witness_minimal = false;
  bool ok() const { return equality_holds && witness_minimal; }
};

// Balanced SVD witness (P_1 S^(1/2), Q_1 S^(1/2)) of width d against `trials`
// random refactorizations (U R, V R^{-T}).
FactorizationCheck schatten_factorization_check(const Eigen::MatrixXd &X, double p,
                                                Eigen::Index d, int trials = 100,
                                                std::uint64_t seed = 7);

struct DiagnosticReport
{
  double objective = 0.0;
  double stationarity_residual = 0.0;
  bool zero_columns_certified = true;
  double balance_gap = 0.0;
  Eigen::Index rank = 0;
  std::vector<double> colspace_gaps;

  static std::string csv_header();
  std::string csv_row() const;
};

DiagnosticReport diagnose(const SmoothLoss &loss, const ThetaSpec &theta, double lambda,
                          double mu, const Eigen::MatrixXd &U, const Eigen::MatrixXd &V,
                          const RankTolerance &tol = {});

} // namespace pama
