#include "fnet/elastic_net.hpp"

#include <cmath>

namespace fnet {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

namespace {

// Population standardization (divide by n) so z_j = (1/n) sum x_ij^2 = 1 for
// every non-constant column.
void standardize(const Eigen::MatrixXd& X, Eigen::MatrixXd& Xs,
                 Eigen::VectorXd& means, Eigen::VectorXd& stds) {
  const auto n = X.rows();
  const auto p = X.cols();
  means = X.colwise().mean();
  Xs = X.rowwise() - means.transpose();
  stds.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double var = Xs.col(j).squaredNorm() / static_cast<double>(n);
    stds[j] = var > 0 ? std::sqrt(var) : 1.0;
    Xs.col(j) /= stds[j];
  }
}

}  // namespace

ElasticNetModel fit_elastic_net(const Eigen::MatrixXd& X,
                                const Eigen::VectorXd& y, double lambda,
                                double alpha, double tol, int max_iter,
                                std::vector<double>* objective_trace) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (n < 1 || p < 1 || y.size() != n) {
    throw RegressionError("fit_elastic_net: bad problem dimensions");
  }
  if (lambda < 0 || alpha < 0 || alpha > 1) {
    throw RegressionError("fit_elastic_net: lambda >= 0 and alpha in [0,1]");
  }

  ElasticNetModel model;
  model.lambda = lambda;
  model.alpha = alpha;

  Eigen::MatrixXd Xs;
  standardize(X, Xs, model.feature_means, model.feature_stds);
  model.intercept = y.mean();
  Eigen::VectorXd yc = y.array() - model.intercept;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd residual = yc;  // yc - Xs * beta
  const double inv_n = 1.0 / static_cast<double>(n);
  // z_j after standardization; constant columns have z_j = 0 and stay at 0.
  Eigen::VectorXd zj(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    zj[j] = Xs.col(j).squaredNorm() * inv_n;
  }

  const double l1 = lambda * alpha;
  const double l2 = lambda * (1.0 - alpha);
  model.converged = false;
  int sweep = 0;
  for (; sweep < max_iter; ++sweep) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (zj[j] == 0.0) continue;
      const double old = beta[j];
      const double rho = inv_n * Xs.col(j).dot(residual) + zj[j] * old;
      const double updated = soft_threshold(rho, l1) / (zj[j] + l2);
      if (updated != old) {
        residual += Xs.col(j) * (old - updated);
        beta[j] = updated;
        max_delta = std::max(max_delta, std::abs(updated - old));
      }
    }
    if (objective_trace) {
      objective_trace->push_back(
          residual.squaredNorm() * inv_n / 2.0 +
          lambda * (alpha * beta.template lpNorm<1>() +
                    (1.0 - alpha) / 2.0 * beta.squaredNorm()));
    }
    if (max_delta < tol) {
      model.converged = true;
      ++sweep;
      break;
    }
  }
  model.sweeps = sweep;
  model.coefficients = beta;
  return model;
}

double ElasticNetModel::predict(const Eigen::VectorXd& features) const {
  if (features.size() != coefficients.size()) {
    throw RegressionError("elastic net predict: feature size mismatch");
  }
  const Eigen::VectorXd z =
      (features - feature_means).cwiseQuotient(feature_stds);
  return intercept + coefficients.dot(z);
}

double predict_elastic_net(const ElasticNetModel& model,
                           const Eigen::VectorXd& features) {
  return model.predict(features);
}

double elastic_net_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const ElasticNetModel& model) {
  const auto n = X.rows();
  double rss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = y[i] - model.predict(X.row(i).transpose());
    rss += r * r;
  }
  const double l1 = model.coefficients.template lpNorm<1>();
  const double l2 = model.coefficients.squaredNorm();
  return rss / (2.0 * static_cast<double>(n)) +
         model.lambda * (model.alpha * l1 + (1.0 - model.alpha) / 2.0 * l2);
}

}  // namespace fnet
