#include "pama/theta.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace pama {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string_view trim(std::string_view s)
{
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view s)
{
  s = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument(fmt::format("bad number '{}' in theta spec", s));
  return v;
}

// Half thresholding: argmin (x - s)^2 + lam * x^(1/2) over x >= 0.
double half_threshold(double lam, double s)
{
  const double thresh = std::cbrt(54.0) / 4.0 * std::pow(lam, 2.0 / 3.0);
  if (s <= thresh)
    return 0.0;
  const double phi = std::acos(lam / 8.0 * std::pow(s / 3.0, -1.5));
  return 2.0 / 3.0 * s * (1.0 + std::cos(2.0 * std::numbers::pi / 3.0 - 2.0 * phi / 3.0));
}

// 2/3 thresholding: argmin (x - s)^2 + lam * x^(2/3) over x >= 0.
double two_thirds_threshold(double lam, double s)
{
  const double thresh = 2.0 / 3.0 * std::pow(3.0 * lam * lam * lam, 0.25);
  if (s <= thresh)
    return 0.0;
  const double psi = std::acosh(27.0 * s * s * std::pow(lam, -1.5) / 16.0);
  const double phi = 2.0 / std::sqrt(3.0) * std::pow(lam, 0.25) * std::sqrt(std::cosh(psi / 3.0));
  const double root = (phi + std::sqrt(2.0 * s / phi - phi * phi)) / 2.0;
  return root * root * root;
}

// Each theta6 branch is at most quadratic in x, so the global minimizer lies among
// the branch stationary points (clipped to their intervals) and the break points.
double theta6_prox(const ThetaSpec &spec, double nu, double s)
{
  const double a = spec.a();
  const double rho = spec.rho();
  const double t1 = spec.lower_break();
  const double t2 = spec.upper_break();

  std::array<double, 6> cand{};
  std::size_t n = 0;
  cand[n++] = 0.0;
  cand[n++] = t1;
  cand[n++] = t2;
  cand[n++] = std::clamp(s - nu * rho, 0.0, t1);
  const double coef = 1.0 / nu - rho * rho * (a + 1.0) * (a + 1.0) / (2.0 * (a * a - 1.0));
  if (coef > 0.0) {
    const double rhs = s / nu - rho - rho / (a - 1.0);
    cand[n++] = std::clamp(rhs / coef, t1, t2);
  }
  cand[n++] = std::max(s, t2);

  double best_x = 0.0;
  double best_cost = s * s / (2.0 * nu);
  for (std::size_t i = 1; i < n; ++i) {
    const double x = cand[i];
    const double cost = (x - s) * (x - s) / (2.0 * nu) + theta_eval(spec, x);
    if (cost < best_cost || (cost == best_cost && x < best_x)) {
      best_cost = cost;
      best_x = x;
    }
  }
  return best_x;
}

} // namespace

ThetaSpec::ThetaSpec(ThetaKind kind) : kind_(kind) {}

ThetaSpec ThetaSpec::theta6(double a, double rho)
{
  if (!(a > 1.0))
    throw std::invalid_argument("theta6 requires a > 1");
  if (!(rho > 0.0))
    throw std::invalid_argument("theta6 requires rho > 0");
  ThetaSpec spec(ThetaKind::Theta6);
  spec.a_ = a;
  spec.rho_ = rho;
  return spec;
}

ThetaSpec ThetaSpec::parse(std::string_view text)
{
  text = trim(text);
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::string_view s = lower;

  if (s.size() < 6 || s.substr(0, 5) != "theta")
    throw std::invalid_argument(fmt::format("unknown theta spec '{}'", text));
  const char digit = s[5];
  if (digit < '1' || digit > '6')
    throw std::invalid_argument(fmt::format("unknown theta spec '{}'", text));
  const auto kind = static_cast<ThetaKind>(digit - '0');
  std::string_view rest = trim(s.substr(6));

  if (kind != ThetaKind::Theta6) {
    if (!rest.empty())
      throw std::invalid_argument(fmt::format("theta{} takes no parameters", digit));
    return ThetaSpec(kind);
  }

  double a = 3.7;
  double rho = 1.0;
  if (!rest.empty()) {
    if (rest.front() != '(' || rest.back() != ')')
      throw std::invalid_argument(fmt::format("malformed theta6 parameters '{}'", rest));
    rest = rest.substr(1, rest.size() - 2);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      std::string_view item = trim(rest.substr(0, comma));
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      const auto eq = item.find('=');
      if (eq == std::string_view::npos)
        throw std::invalid_argument(fmt::format("expected key=value, got '{}'", item));
      const auto key = trim(item.substr(0, eq));
      const double value = parse_double(item.substr(eq + 1));
      if (key == "a")
        a = value;
      else if (key == "rho")
        rho = value;
      else
        throw std::invalid_argument(fmt::format("unknown theta6 parameter '{}'", key));
    }
  }
  return theta6(a, rho);
}

std::string ThetaSpec::to_string() const
{
  if (kind_ == ThetaKind::Theta6)
    return fmt::format("theta6(a={},rho={})", a_, rho_);
  return fmt::format("theta{}", static_cast<int>(kind_));
}

double theta_eval(const ThetaSpec &spec, double t)
{
  if (t < 0.0)
    return kInf;
  switch (spec.kind()) {
  case ThetaKind::Theta1:
    return t > 0.0 ? 1.0 : 0.0;
  case ThetaKind::Theta2:
    return t * t;
  case ThetaKind::Theta3:
    return t;
  case ThetaKind::Theta4:
    return std::sqrt(t);
  case ThetaKind::Theta5:
    return std::cbrt(t * t);
  case ThetaKind::Theta6: {
    const double a = spec.a();
    const double rho = spec.rho();
    if (t > spec.upper_break())
      return 1.0;
    if (t > spec.lower_break()) {
      const double d = rho * (a + 1.0) * t - 2.0;
      return rho * t - d * d / (4.0 * (a * a - 1.0));
    }
    return rho * t;
  }
  }
  return kInf;
}

double theta_derivative(const ThetaSpec &spec, double t)
{
  if (!(t > 0.0))
    throw std::invalid_argument("theta_derivative requires t > 0");
  switch (spec.kind()) {
  case ThetaKind::Theta1:
    return 0.0;
  case ThetaKind::Theta2:
    return 2.0 * t;
  case ThetaKind::Theta3:
    return 1.0;
  case ThetaKind::Theta4:
    return 0.5 / std::sqrt(t);
  case ThetaKind::Theta5:
    return 2.0 / (3.0 * std::cbrt(t));
  case ThetaKind::Theta6: {
    const double a = spec.a();
    const double rho = spec.rho();
    if (t > spec.upper_break())
      return 0.0;
    if (t > spec.lower_break())
      return rho - rho * (a + 1.0) * (rho * (a + 1.0) * t - 2.0) / (2.0 * (a * a - 1.0));
    return rho;
  }
  }
  return 0.0;
}

double prox_theta_scalar(const ThetaSpec &spec, double nu, double s)
{
  if (!(nu > 0.0))
    throw std::invalid_argument("prox_theta_scalar requires nu > 0");
  if (!(s >= 0.0))
    throw std::invalid_argument("prox_theta_scalar requires s >= 0");
  if (s == 0.0)
    return 0.0;

  switch (spec.kind()) {
  case ThetaKind::Theta1:
    // cost(0) = s^2/(2nu), cost(s) = 1; ties go to 0
    return s * s > 2.0 * nu ? s : 0.0;
  case ThetaKind::Theta2:
    return s / (1.0 + 2.0 * nu);
  case ThetaKind::Theta3:
    return std::max(s - nu, 0.0);
  case ThetaKind::Theta4:
    return half_threshold(2.0 * nu, s);
  case ThetaKind::Theta5:
    return two_thirds_threshold(2.0 * nu, s);
  case ThetaKind::Theta6:
    return theta6_prox(spec, nu, s);
  }
  return 0.0;
}

Eigen::VectorXd prox_column(const ThetaSpec &spec, double lambda, double gamma,
                            const Eigen::Ref<const Eigen::VectorXd> &u)
{
  if (!(gamma > 0.0))
    throw std::invalid_argument("prox_column requires gamma > 0");
  if (!(lambda > 0.0))
    throw std::invalid_argument("prox_column requires lambda > 0");
  const double norm = u.norm();
  if (norm == 0.0)
    return Eigen::VectorXd::Zero(u.size());
  const double mag = prox_theta_scalar(spec, lambda / (gamma * gamma), norm / gamma);
  if (mag == 0.0)
    return Eigen::VectorXd::Zero(u.size());
  return u * (mag / norm);
}

double vartheta_eval(const ThetaSpec &spec, const Eigen::Ref<const Eigen::MatrixXd> &W)
{
  double total = 0.0;
  for (Eigen::Index j = 0; j < W.cols(); ++j)
    total += theta_eval(spec, W.col(j).norm());
  return total;
}

} // namespace pama
