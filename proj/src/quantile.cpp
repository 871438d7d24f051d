#include "fnet/quantile.hpp"

#include <algorithm>
#include <cmath>

namespace fnet {

double pinball_loss(double pred, double y, double q) {
  const double diff = y - pred;
  return diff >= 0 ? q * diff : (q - 1.0) * diff;
}

QuantileModel fit_quantile(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           std::vector<double> quantiles, double lr,
                           int steps) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (n < 1 || p < 1 || y.size() != n) {
    throw RegressionError("fit_quantile: bad problem dimensions");
  }
  for (std::size_t i = 0; i < quantiles.size(); ++i) {
    if (quantiles[i] <= 0 || quantiles[i] >= 1 ||
        (i > 0 && quantiles[i] <= quantiles[i - 1])) {
      throw RegressionError(
          "fit_quantile: quantiles must be strictly increasing in (0, 1)");
    }
  }

  QuantileModel model;
  model.quantiles = std::move(quantiles);

  // Same internal standardization as the elastic net.
  Eigen::MatrixXd Xs = X;
  model.feature_means = X.colwise().mean();
  Xs.rowwise() -= model.feature_means.transpose();
  model.feature_stds.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double var = Xs.col(j).squaredNorm() / static_cast<double>(n);
    model.feature_stds[j] = var > 0 ? std::sqrt(var) : 1.0;
    Xs.col(j) /= model.feature_stds[j];
  }

  const auto nq = static_cast<Eigen::Index>(model.quantiles.size());
  model.weights = Eigen::MatrixXd::Zero(nq, p);
  model.intercepts = Eigen::VectorXd::Zero(nq);

  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index qi = 0; qi < nq; ++qi) {
    const double q = model.quantiles[static_cast<std::size_t>(qi)];
    Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
    double b = y.mean();
    for (int t = 0; t < steps; ++t) {
      // Mean pinball subgradient: -q on under-prediction, (1-q) on over.
      Eigen::VectorXd gw = Eigen::VectorXd::Zero(p);
      double gb = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double pred = Xs.row(i).dot(w) + b;
        const double g = y[i] > pred ? -q : (y[i] < pred ? 1.0 - q : 0.0);
        gw += g * Xs.row(i).transpose();
        gb += g;
      }
      const double step = lr / std::sqrt(1.0 + t);
      w -= step * inv_n * gw;
      b -= step * inv_n * gb;
    }
    model.weights.row(qi) = w.transpose();
    model.intercepts[qi] = b;
  }
  return model;
}

std::vector<double> predict_quantiles(const QuantileModel& model,
                                      const Eigen::VectorXd& features) {
  if (features.size() != model.weights.cols()) {
    throw RegressionError("predict_quantiles: feature size mismatch");
  }
  const Eigen::VectorXd z =
      (features - model.feature_means).cwiseQuotient(model.feature_stds);
  std::vector<double> preds;
  preds.reserve(model.quantiles.size());
  for (Eigen::Index qi = 0; qi < model.weights.rows(); ++qi) {
    preds.push_back(model.weights.row(qi).dot(z) + model.intercepts[qi]);
  }
  std::sort(preds.begin(), preds.end());
  return preds;
}

double sigma_from_quantiles(const QuantileModel& model,
                            const Eigen::VectorXd& features) {
  const auto preds = predict_quantiles(model, features);
  return std::max(preds.back() - preds.front(), 1.0);
}

}  // namespace fnet
