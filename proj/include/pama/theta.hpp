#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>

namespace pama {

// Sparsity-inducing scalar penalties on R_+. Each satisfies theta(0) = 0,
// theta(t) > 0 for t > 0, theta(t) = +inf for t < 0, is differentiable on
// (0, inf), and has a closed-form proximal mapping.
//
//   Theta1  indicator of t != 0 (column l2,0 when applied to norms)
//   Theta2  t^2
//   Theta3  t
//   Theta4  t^(1/2)
//   Theta5  t^(2/3)
//   Theta6  capped concave penalty with parameters a > 1, rho > 0
enum class ThetaKind { Theta1 = 1, Theta2, Theta3, Theta4, Theta5, Theta6 };

class ThetaSpec
{
public:
  ThetaSpec() = default;
  explicit ThetaSpec(ThetaKind kind);
  // Theta6 only; throws std::invalid_argument unless a > 1 and rho > 0.
  static ThetaSpec theta6(double a, double rho);

  // Accepts "theta1" ... "theta5" and "theta6(a=3,rho=1.5)".
  static ThetaSpec parse(std::string_view text);
  std::string to_string() const;

  ThetaKind kind() const { return kind_; }
  double a() const { return a_; }
  double rho() const { return rho_; }

  // Theta6 branch points 2/(rho(a+1)) and 2a/(rho(a+1)).
  double lower_break() const { return 2.0 / (rho_ * (a_ + 1.0)); }
  double upper_break() const { return 2.0 * a_ / (rho_ * (a_ + 1.0)); }

  friend bool operator==(const ThetaSpec &, const ThetaSpec &) = default;

private:
  ThetaKind kind_ = ThetaKind::Theta1;
  double a_ = 3.7;
  double rho_ = 1.0;
};

double theta_eval(const ThetaSpec &spec, double t);

// Derivative on (0, inf). Throws std::invalid_argument for t <= 0.
double theta_derivative(const ThetaSpec &spec, double t);

// One element of argmin_x { (x - s)^2 / (2 nu) + theta(x) } for nu > 0, s >= 0.
// When the argmin is a set, the element of smallest magnitude is returned,
// which makes the map single-valued and nondecreasing in s.
double prox_theta_scalar(const ThetaSpec &spec, double nu, double s);

// Minimizer of 0.5 * ||gamma x - u||^2 + lambda * theta(||x||):
// (u / ||u||) * prox_theta_scalar(lambda / gamma^2, ||u|| / gamma), and 0 for u = 0.
Eigen::VectorXd prox_column(const ThetaSpec &spec, double lambda, double gamma,
                            const Eigen::Ref<const Eigen::VectorXd> &u);

// sum_i theta(||W_i||) over the columns of W.
double vartheta_eval(const ThetaSpec &spec, const Eigen::Ref<const Eigen::MatrixXd> &W);

} // namespace pama
