#ifndef FNET_PREDICTOR_HPP
#define FNET_PREDICTOR_HPP

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fnet/backbone.hpp"
#include "fnet/elastic_net.hpp"
#include "fnet/ingest.hpp"
#include "fnet/optimize.hpp"
#include "fnet/preprocess.hpp"
#include "fnet/quantile.hpp"

namespace fnet {

enum class PredictorErrc {
  MissingStats,
  InsufficientVisits,
  EmptyInput,
};

class PredictorError : public std::runtime_error {
 public:
  PredictorError(PredictorErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  PredictorErrc code() const { return code_; }

 private:
  PredictorErrc code_;
};

// Standardization statistics captured from the training cohort.
struct EncodingStats {
  double age_mean = 0.0, age_std = 1.0;
  double percent_mean = 0.0, percent_std = 1.0;
  double fvc_mean = 0.0, fvc_std = 1.0;
};

EncodingStats compute_encoding_stats(const std::vector<PatientRecord>& records);

// Standardized clinical inputs for the slope head. base_week is carried for
// extrapolation and is not part of the feature vector.
struct ClinicalFeatures {
  float age_z = 0.f;
  float sex_male = 0.f;
  float smoking_onehot[3] = {0.f, 0.f, 0.f};  // (Current, Ex, Never)
  float percent_z = 0.f;
  float base_fvc_z = 0.f;
  int base_week = 0;

  static constexpr int kDim = 7;
  Eigen::Matrix<float, kDim, 1> vector() const {
    Eigen::Matrix<float, kDim, 1> v;
    v << age_z, sex_male, smoking_onehot[0], smoking_onehot[1],
        smoking_onehot[2], percent_z, base_fvc_z;
    return v;
  }
};

ClinicalFeatures encode_metadata(const PatientRecord& record,
                                 const FvcVisit& base_visit,
                                 const EncodingStats& stats);

// slope = dense([features || clinical]) with a single scalar output.
double slice_slope(const Eigen::VectorXf& features,
                   const ClinicalFeatures& clinical, const Tensor32& head_w,
                   const Tensor32& head_b);

// Median; even counts average the two middle order statistics.
double aggregate_slopes(const std::vector<double>& slopes);

// Interquartile range (linear-interpolated quartiles) of the slice slopes.
double slope_iqr(std::vector<double> slopes);

inline double extrapolate_fvc(double base_fvc, int base_week, double slope,
                              int target_week) {
  return base_fvc + slope * (target_week - base_week);
}

enum class SigmaSource { Formula, Quantile };

// Defaults calibrated on held-out synthetic cohorts: the imaging path is
// the only component that resolves per-patient decline there, so it gets
// most of the ensemble weight, and sigma0 + 2.5 ml/week tracks the observed
// error growth (200 + 3/week over-estimated it).
struct EnsembleConfig {
  double cnn_weight = 0.8;            // w in [0, 1]
  double sigma0 = 120.0;              // ml
  double sigma_week_gain = 2.5;       // ml/week
  double sigma_dispersion_gain = 1.0;
  SigmaSource sigma_source = SigmaSource::Formula;
};

void validate(const EnsembleConfig& cfg);

// w * fvc_cnn + (1-w) * fvc_enet, clamped to >= 1 ml.
double ensemble_fvc(double fvc_cnn, double fvc_enet, const EnsembleConfig& cfg);

// sigma = sigma0 + a*weeks_elapsed + b*slope_iqr*weeks_elapsed, floored at 1.
double estimate_sigma(double weeks_elapsed, double slope_iqr,
                      const EnsembleConfig& cfg);

struct FvcPrediction {
  double fvc_ml = 0.0;    // > 0
  double sigma_ml = 1.0;  // >= 1
  int target_week = 0;
};

// Elastic-net / quantile feature vector:
// [base FVC, percent, age, sex_male, smoking one-hot x3, target - base week]
Eigen::VectorXd build_meta_features(const PatientRecord& record,
                                    int target_week);
constexpr int kMetaFeatureDim = 8;

struct FibrosisModel {
  BackboneConfig backbone_cfg;
  PreprocessConfig preprocess_cfg;
  ParamStore<float> params;  // backbone + slope head
  EncodingStats stats;
  ElasticNetModel enet;
  QuantileModel quantile;
  EnsembleConfig ensemble;
};

constexpr const char* kHeadWeightName = "head.w";
constexpr const char* kHeadBiasName = "head.b";

// Backbone features for a batch of preprocessed slices, then per-slice
// slopes through the head, on the same op graph used in training.
std::vector<double> slice_slopes(const FibrosisModel& model,
                                 const std::vector<NormalizedSlice>& slices,
                                 const ClinicalFeatures& clinical);

// CT volume + record -> (FVC, sigma) at target_week: preprocess, per-slice
// slopes, median, extrapolate from the first visit, ensemble with the
// elastic-net prediction, attach sigma.
FvcPrediction predict_patient(const CtVolume& volume,
                              const PatientRecord& record, int target_week,
                              const FibrosisModel& model);

// The convolutional-path prediction alone (median slope extrapolation).
double predict_cnn_fvc(const FibrosisModel& model,
                       const std::vector<NormalizedSlice>& slices,
                       const PatientRecord& record, int target_week);

struct CohortEntry {
  PatientRecord record;
  CtVolume volume;
};

struct TrainConfig {
  int steps = 500;
  int batch_size = 8;
  std::uint64_t seed = 0;
  LrSchedule lr;
  // Adam moves a weight by at most ~lr per step, and 500 steps at 1e-4 can
  // only traverse ~0.05; the slope head must cover tens of ml/week, so it
  // gets its own larger-lr group (see notes in the repo docs).
  double head_lr_multiplier = 450.0;
  BackboneConfig backbone = BackboneConfig::desk_default();
  PreprocessConfig preprocess;
  double enet_lambda = 1.0;
  double enet_alpha = 0.5;
  std::vector<double> quantiles = {0.2, 0.5, 0.8};
  EnsembleConfig ensemble;
};

struct TrainReport {
  std::vector<float> loss_history;  // batch MAE per step, ml
  double train_mae = 0.0;           // full-inference CNN-path MAE, ml
};

// End-to-end training per the recipe: batches of (patient, non-baseline
// visit, random slice) triples, MAE between the extrapolated and measured
// visit FVC, Adam with the staircase lr schedule. Deterministic given seed.
FibrosisModel train(const std::vector<CohortEntry>& cohort,
                    const TrainConfig& cfg, TrainReport* report = nullptr);

// Mean |cnn prediction - measured FVC| over all non-baseline visits.
double cnn_training_mae(const FibrosisModel& model,
                        const std::vector<CohortEntry>& cohort);

}  // namespace fnet

#endif  // FNET_PREDICTOR_HPP
