#ifndef FNET_ELASTIC_NET_HPP
#define FNET_ELASTIC_NET_HPP

#include <Eigen/Core>

#include <stdexcept>
#include <vector>

namespace fnet {

class RegressionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Linear model fit by cyclic coordinate descent on
//   (1/2n) * sum_i (y_i - b0 - beta.x_i)^2
//     + lambda * (alpha * |beta|_1 + (1-alpha)/2 * |beta|_2^2)
// with features standardized internally and y centered internally.
// Coefficients live in standardized feature space.
struct ElasticNetModel {
  Eigen::VectorXd coefficients;  // per standardized feature
  double intercept = 0.0;        // mean of y
  double lambda = 1.0;
  double alpha = 0.5;  // L1 mix in [0, 1]
  Eigen::VectorXd feature_means;
  Eigen::VectorXd feature_stds;  // > 0 (constant features pinned to 1)
  bool converged = true;
  int sweeps = 0;

  double predict(const Eigen::VectorXd& features) const;
};

// Soft-threshold operator S(z, t) = sign(z) * max(|z| - t, 0).
double soft_threshold(double z, double t);

// objective_trace, when given, records the penalized objective after every
// sweep (it is non-increasing; see the property tests).
ElasticNetModel fit_elastic_net(const Eigen::MatrixXd& X,
                                const Eigen::VectorXd& y, double lambda,
                                double alpha, double tol = 1e-8,
                                int max_iter = 10000,
                                std::vector<double>* objective_trace = nullptr);

double predict_elastic_net(const ElasticNetModel& model,
                           const Eigen::VectorXd& features);

// Penalized objective at the model's current coefficients, for monitoring
// monotone descent across sweeps.
double elastic_net_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const ElasticNetModel& model);

}  // namespace fnet

#endif  // FNET_ELASTIC_NET_HPP
