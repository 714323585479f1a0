#include "pama/linalg.hpp"
#include "pama/loss.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace pama;

namespace {

ObservationSet single(Eigen::Index n, Eigen::Index m, Eigen::Index i, Eigen::Index j, int y)
{
  return ObservationSet(n, m, {Observation{i, j, y}});
}

double fd_entry(const SmoothLoss &loss, Eigen::MatrixXd X, Eigen::Index i, Eigen::Index j)
{
  const double h = 1e-6;
  const double x0 = X(i, j);
  X(i, j) = x0 + h;
  const double fp = loss.value(X);
  X(i, j) = x0 - h;
  const double fm = loss.value(X);
  return (fp - fm) / (2 * h);
}

} // namespace

TEST_CASE("link functions")
{
  CHECK(phi_cdf(LossKind::OneBitLogistic, 1.0, 0.0) == doctest::Approx(0.5));
  CHECK(phi_cdf(LossKind::OneBitLaplace, 2.0, 0.0) == doctest::Approx(0.5));
  CHECK(phi_cdf(LossKind::OneBitLaplace, 1.0, -1.0) == doctest::Approx(0.5 * std::exp(-1.0)));
  CHECK(phi_cdf(LossKind::OneBitLogistic, 1.0, 800.0) == 1.0);
  CHECK(phi_cdf(LossKind::OneBitLogistic, 1.0, -800.0) >= 0.0);
  CHECK_THROWS_AS(phi_cdf(LossKind::OneBitLaplace, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("loss values")
{
  const Eigen::MatrixXd X = Eigen::MatrixXd::Zero(3, 2);
  CHECK(SmoothLoss::logistic(single(3, 2, 1, 1, 1)).value(X) == doctest::Approx(std::log(2.0)));
  CHECK(SmoothLoss::laplace(single(3, 2, 0, 1, -1), 2.0).value(X) == doctest::Approx(std::log(2.0)));
  CHECK(SmoothLoss::logistic(ObservationSet(3, 2, {})).value(X) == 0.0);
  CHECK(SmoothLoss::laplace(ObservationSet(3, 2, {}), 2.0).value(X) == 0.0);

  // far in the tails the log forms stay finite
  Eigen::MatrixXd big = X;
  big(1, 1) = -1e3;
  const double v = SmoothLoss::logistic(single(3, 2, 1, 1, 1)).value(big);
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(1e3));
  const double w = SmoothLoss::laplace(single(3, 2, 1, 1, 1), 2.0).value(big);
  CHECK(w == doctest::Approx(std::log(2.0) + 500.0));
}

TEST_CASE("loss gradients")
{
  const Eigen::MatrixXd X = Eigen::MatrixXd::Zero(3, 2);
  const SmoothLoss lg = SmoothLoss::logistic(single(3, 2, 1, 1, 1));
  const Eigen::MatrixXd G = lg.gradient(X);
  CHECK(G(1, 1) == doctest::Approx(-0.5));
  CHECK(fd_entry(lg, X, 1, 1) == doctest::Approx(G(1, 1)).epsilon(1e-6));
  CHECK(G(0, 0) == 0.0);
  CHECK(G.norm() == doctest::Approx(0.5));

  const SmoothLoss lp = SmoothLoss::laplace(single(3, 2, 2, 0, 1), 2.0);
  const Eigen::MatrixXd H = lp.gradient(X);
  CHECK(H(2, 0) == doctest::Approx(-0.5));
  CHECK(fd_entry(lp, X, 2, 0) == doctest::Approx(H(2, 0)).epsilon(1e-6));
}

TEST_CASE("gradients match finite differences away from zero")
{
  Rng rng(5);
  std::vector<Observation> entries;
  for (int t = 0; t < 30; ++t)
    entries.push_back({static_cast<Eigen::Index>(rng.index(6)), static_cast<Eigen::Index>(rng.index(5)),
                       rng.uniform() < 0.5 ? 1 : -1});
  const ObservationSet obs(6, 5, entries);
  const Eigen::MatrixXd X = 1.5 * gaussian_matrix(6, 5, rng);
  for (const SmoothLoss &loss : {SmoothLoss::logistic(obs), SmoothLoss::laplace(obs, 1.3),
                                 SmoothLoss::masked_quadratic(obs, gaussian_matrix(6, 5, rng))}) {
    const Eigen::MatrixXd G = loss.gradient(X);
    for (Eigen::Index i = 0; i < 6; ++i)
      for (Eigen::Index j = 0; j < 5; ++j)
        CHECK(fd_entry(loss, X, i, j) == doctest::Approx(G(i, j)).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("observed-entry path agrees with the dense path")
{
  Rng rng(9);
  std::vector<Observation> entries;
  for (int t = 0; t < 40; ++t)
    entries.push_back({static_cast<Eigen::Index>(rng.index(7)), static_cast<Eigen::Index>(rng.index(6)),
                       rng.uniform() < 0.5 ? 1 : -1});
  const SmoothLoss loss = SmoothLoss::logistic(ObservationSet(7, 6, entries));
  const Eigen::MatrixXd U = gaussian_matrix(7, 3, rng);
  const Eigen::MatrixXd V = gaussian_matrix(6, 3, rng);
  const Eigen::MatrixXd X = U * V.transpose();
  const Eigen::VectorXd x = loss.entries(U, V);
  CHECK(loss.value_on(x) == doctest::Approx(loss.value(X)).epsilon(1e-12));
  const Eigen::MatrixXd Gs = Eigen::MatrixXd(loss.gradient_sparse(x));
  CHECK((Gs - loss.gradient(X)).norm() < 1e-12);
}

TEST_CASE("Lipschitz constants")
{
  const ObservationSet obs(3, 3, {{0, 0, 1}, {1, 2, -1}, {2, 1, 1}});
  CHECK(SmoothLoss::logistic(obs).lipschitz_constant() == 1.0);
  CHECK(SmoothLoss::laplace(obs, 2.0).lipschitz_constant() == doctest::Approx(0.5));
  CHECK(SmoothLoss::masked_quadratic(obs, Eigen::MatrixXd::Zero(3, 3)).lipschitz_constant() == 1.0);

  const ObservationSet twice(3, 3, {{0, 0, 1}, {0, 0, -1}});
  CHECK(twice.max_multiplicity() == 2);
  CHECK(SmoothLoss::masked_quadratic(twice, Eigen::MatrixXd::Zero(3, 3)).lipschitz_constant() == 2.0);
  CHECK(SmoothLoss::laplace(twice, 2.0).lipschitz_constant() == doctest::Approx(1.0));
  CHECK(SmoothLoss::logistic(twice).lipschitz_constant() == 1.0);
}

TEST_CASE("observation sets")
{
  const ObservationSet obs(4, 3, {{0, 0, 1}, {3, 2, -1}, {0, 0, -1}});
  const Eigen::MatrixXd Y = obs.sign_matrix();
  CHECK(Y(0, 0) == -1.0);
  CHECK(Y(3, 2) == -1.0);
  CHECK(Y.cwiseAbs().sum() == 2.0);

  std::stringstream ss;
  obs.write(ss);
  CHECK(ObservationSet::read(ss) == obs);

  std::istringstream bad("4 3 2\n0 0 1\n");
  CHECK_THROWS(ObservationSet::read(bad));
  CHECK_THROWS(ObservationSet(2, 2, {{2, 0, 1}}));
  CHECK_THROWS(ObservationSet(2, 2, {{0, 0, 0}}));
}
