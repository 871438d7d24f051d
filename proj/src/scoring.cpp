#include "fnet/scoring.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace fnet {

double laplace_log_likelihood(const ScoredPrediction& p) {
  if (!std::isfinite(p.fvc_true) || !std::isfinite(p.fvc_predicted) ||
      !std::isfinite(p.sigma)) {
    throw ScoringError("laplace_log_likelihood: non-finite input");
  }
  const double sigma_clipped = std::max(p.sigma, 70.0);
  const double delta = std::min(std::abs(p.fvc_true - p.fvc_predicted), 1000.0);
  const double sqrt2 = std::sqrt(2.0);
  return -sqrt2 * delta / sigma_clipped - std::log(sqrt2 * sigma_clipped);
}

double score_cohort(const std::vector<ScoredPrediction>& predictions) {
  if (predictions.empty()) {
    throw ScoringError("score_cohort: empty prediction list");
  }
  double total = 0.0;
  for (const auto& p : predictions) total += laplace_log_likelihood(p);
  return total / static_cast<double>(predictions.size());
}

double optimal_sigma(double delta) {
  if (!std::isfinite(delta) || delta < 0) {
    throw ScoringError("optimal_sigma: delta must be finite and >= 0");
  }
  return std::max(70.0, std::sqrt(2.0) * delta);
}

const std::vector<ReferenceScore>& reference_scores() {
  static const std::vector<ReferenceScore> rows = {
      {"Kaggle 1st place", -6.8305},
      {"Kaggle 2nd place", -6.8311},
      {"Kaggle 3rd place", -6.8336},
      {"Fibrosis-Net", -6.8188},
  };
  return rows;
}

std::string render_score_table(
    const std::vector<std::pair<std::string, double>>& runs) {
  std::ostringstream os;
  os << std::fixed;
  os << "Method                    Laplace Log Likelihood\n";
  os << "------------------------  ----------------------\n";
  for (const auto& ref : reference_scores()) {
    os << std::left << std::setw(26) << ref.method << std::right
       << std::setprecision(4) << std::setw(22) << ref.score << "\n";
  }
  for (const auto& [name, score] : runs) {
    os << std::left << std::setw(26) << name << std::right
       << std::setprecision(5) << std::setw(22) << score << "\n";
  }
  return os.str();
}

}  // namespace fnet
