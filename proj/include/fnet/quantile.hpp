#ifndef FNET_QUANTILE_HPP
#define FNET_QUANTILE_HPP

#include <Eigen/Core>

#include <vector>

#include "fnet/elastic_net.hpp"

namespace fnet {

// Per-quantile linear models trained with pinball loss. Predictions are
// sorted across quantiles so they are monotone in q regardless of what the
// individual fits produced.
struct QuantileModel {
  std::vector<double> quantiles;  // strictly increasing, in (0, 1)
  Eigen::MatrixXd weights;        // one row per quantile, standardized space
  Eigen::VectorXd intercepts;
  Eigen::VectorXd feature_means;
  Eigen::VectorXd feature_stds;
};

// q * max(y - pred, 0) + (1 - q) * max(pred - y, 0)
double pinball_loss(double pred, double y, double q);

// Subgradient descent with a 1/sqrt(t) step decay on standardized features.
QuantileModel fit_quantile(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           std::vector<double> quantiles = {0.2, 0.5, 0.8},
                           double lr = 0.5, int steps = 5000);

// Per-quantile predictions, sorted ascending (monotone in q).
std::vector<double> predict_quantiles(const QuantileModel& model,
                                      const Eigen::VectorXd& features);

// Spread between the top and bottom quantile predictions, floored at 1 ml.
double sigma_from_quantiles(const QuantileModel& model,
                            const Eigen::VectorXd& features);

}  // namespace fnet

#endif  // FNET_QUANTILE_HPP
