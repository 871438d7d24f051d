#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fnet/quantile.hpp"

using namespace fnet;

namespace {

// Brute-force scan of constant predictors over a grid; returns the best grid
// value (ties keep the lowest).
double grid_best_constant(const Eigen::VectorXd& y, double q, double lo,
                          double hi, double step) {
  double best_v = lo, best_loss = std::numeric_limits<double>::infinity();
  for (double v = lo; v <= hi + 1e-12; v += step) {
    double loss = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      loss += pinball_loss(v, y[i], q);
    }
    if (loss < best_loss - 1e-12) {
      best_loss = loss;
      best_v = v;
    }
  }
  return best_v;
}

// All grid values whose loss is within eps of the optimum (the minimizer can
// be a whole interval for pinball loss).
std::vector<double> grid_optimal_set(const Eigen::VectorXd& y, double q,
                                     double lo, double hi, double step) {
  double best_loss = std::numeric_limits<double>::infinity();
  for (double v = lo; v <= hi + 1e-12; v += step) {
    double loss = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) loss += pinball_loss(v, y[i], q);
    best_loss = std::min(best_loss, loss);
  }
  std::vector<double> out;
  for (double v = lo; v <= hi + 1e-12; v += step) {
    double loss = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) loss += pinball_loss(v, y[i], q);
    if (loss <= best_loss + 1e-9) out.push_back(v);
  }
  return out;
}

double dist_to_set(double v, const std::vector<double>& set) {
  double d = std::numeric_limits<double>::infinity();
  for (double s : set) d = std::min(d, std::abs(v - s));
  return d;
}

}  // namespace

TEST_CASE("pinball loss basics") {
  CHECK(pinball_loss(5.0, 5.0, 0.5) == 0.0);
  CHECK(pinball_loss(8.0, 10.0, 0.5) == doctest::Approx(1.0));
  CHECK(pinball_loss(8.0, 10.0, 0.9) == doctest::Approx(1.8));
  CHECK(pinball_loss(12.0, 10.0, 0.9) == doctest::Approx(0.2));
  CHECK(pinball_loss(-3.0, -3.0, 0.2) == 0.0);
}

TEST_CASE("intercept-only median fit lands on the empirical median") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(5, 1);
  Eigen::VectorXd y(5);
  y << 1, 2, 3, 4, 5;
  const auto m = fit_quantile(X, y, {0.5});
  const double fitted = m.intercepts[0];
  const double oracle = grid_best_constant(y, 0.5, 0.0, 6.0, 0.01);
  CHECK(std::abs(fitted - oracle) < 0.1);
  CHECK(fitted == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("intercept-only q=0.8 fit lands in the grid-optimal region") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(10, 1);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) y[i] = i + 1;
  const auto m = fit_quantile(X, y, {0.8});
  const auto optimal = grid_optimal_set(y, 0.8, 0.0, 11.0, 0.05);
  REQUIRE(!optimal.empty());
  CHECK(dist_to_set(m.intercepts[0], optimal) < 0.5);
}

TEST_CASE("exactly representable data drives all quantile losses to ~0") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd X(40, 2);
  for (int i = 0; i < 40; ++i) {
    X(i, 0) = dist(rng);
    X(i, 1) = dist(rng);
  }
  const Eigen::VectorXd y = X * Eigen::Vector2d(2.0, -1.0) +
                            Eigen::VectorXd::Constant(40, 5.0);
  const auto m = fit_quantile(X, y, {0.2, 0.5, 0.8}, 0.5, 20000);
  for (std::size_t qi = 0; qi < m.quantiles.size(); ++qi) {
    double loss = 0;
    for (int i = 0; i < 40; ++i) {
      const auto preds = predict_quantiles(m, X.row(i).transpose());
      loss += pinball_loss(preds[qi], y[i], m.quantiles[qi]);
    }
    CAPTURE(qi);
    CHECK(loss / 40.0 < 0.05);
  }
}

TEST_CASE("predictions are monotone in q for arbitrary inputs") {
  std::mt19937_64 rng(32);
  std::normal_distribution<double> dist(0.0, 2.0);
  Eigen::MatrixXd X(30, 3);
  Eigen::VectorXd y(30);
  for (int i = 0; i < 30; ++i) {
    for (int j = 0; j < 3; ++j) X(i, j) = dist(rng);
    y[i] = 3.0 * X(i, 0) - X(i, 2) + dist(rng);
  }
  const auto m = fit_quantile(X, y);
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd f(3);
    for (int j = 0; j < 3; ++j) f[j] = dist(rng);
    const auto preds = predict_quantiles(m, f);
    for (std::size_t k = 1; k < preds.size(); ++k) {
      CHECK(preds[k] >= preds[k - 1]);
    }
  }
}

TEST_CASE("sigma_from_quantiles is the spread with a floor of 1") {
  QuantileModel m;
  m.quantiles = {0.2, 0.8};
  m.weights = Eigen::MatrixXd::Zero(2, 1);
  m.intercepts = Eigen::VectorXd(2);
  m.intercepts << 2900.0, 3100.0;
  m.feature_means = Eigen::VectorXd::Zero(1);
  m.feature_stds = Eigen::VectorXd::Ones(1);
  CHECK(sigma_from_quantiles(m, Eigen::VectorXd::Zero(1)) ==
        doctest::Approx(200.0));

  m.intercepts << 3000.0, 3000.0;  // identical models -> floor
  CHECK(sigma_from_quantiles(m, Eigen::VectorXd::Zero(1)) == 1.0);
}

TEST_CASE("sigma is always >= 1 under random models") {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> dist(0.0, 3.0);
  QuantileModel m;
  m.quantiles = {0.2, 0.5, 0.8};
  m.weights = Eigen::MatrixXd(3, 2);
  m.intercepts = Eigen::VectorXd(3);
  m.feature_means = Eigen::VectorXd::Zero(2);
  m.feature_stds = Eigen::VectorXd::Ones(2);
  for (int it = 0; it < 30; ++it) {
    for (int q = 0; q < 3; ++q) {
      m.intercepts[q] = dist(rng);
      for (int j = 0; j < 2; ++j) m.weights(q, j) = dist(rng);
    }
    Eigen::VectorXd f(2);
    f << dist(rng), dist(rng);
    CHECK(sigma_from_quantiles(m, f) >= 1.0);
  }
}

TEST_CASE("quantile list validation") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(3, 1);
  Eigen::VectorXd y(3);
  y << 1, 2, 3;
  CHECK_THROWS_AS(fit_quantile(X, y, {0.5, 0.5}), RegressionError);
  CHECK_THROWS_AS(fit_quantile(X, y, {0.0, 0.5}), RegressionError);
  CHECK_THROWS_AS(fit_quantile(X, y, {0.2, 1.0}), RegressionError);
}
