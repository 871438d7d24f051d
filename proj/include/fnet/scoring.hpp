#ifndef FNET_SCORING_HPP
#define FNET_SCORING_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace fnet {

class ScoringError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScoredPrediction {
  double fvc_true = 0.0;       // ml, > 0
  double fvc_predicted = 0.0;  // ml
  double sigma = 0.0;          // ml
};

// Modified Laplace log likelihood, evaluated in 64-bit:
//   sigma_clipped = max(sigma, 70 ml)
//   delta         = min(|fvc_true - fvc_predicted|, 1000 ml)
//   L             = -sqrt(2) * delta / sigma_clipped - ln(sqrt(2) * sigma_clipped)
// Always <= -ln(sqrt(2)*70); higher (less negative) is better.
double laplace_log_likelihood(const ScoredPrediction& p);

// Arithmetic mean of per-prediction L over the cohort.
double score_cohort(const std::vector<ScoredPrediction>& predictions);

// The sigma maximizing L for a fixed error: max(70, sqrt(2)*delta).
double optimal_sigma(double delta);

// Published comparison constants for the challenge test cohort. These are
// reference rows for report rendering, not reproduction targets (the cohort
// they were computed on is private).
struct ReferenceScore {
  const char* method;
  double score;
};
const std::vector<ReferenceScore>& reference_scores();

// Plain-text comparison table: reference rows plus one row per named run.
std::string render_score_table(
    const std::vector<std::pair<std::string, double>>& runs);

}  // namespace fnet

#endif  // FNET_SCORING_HPP
