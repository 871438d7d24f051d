#include "fnet/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fnet {

EncodingStats compute_encoding_stats(const std::vector<PatientRecord>& records) {
  if (records.empty()) {
    throw PredictorError(PredictorErrc::EmptyInput,
                         "compute_encoding_stats: no records");
  }
  const double n = static_cast<double>(records.size());
  EncodingStats s;
  double age = 0, percent = 0, fvc = 0;
  for (const auto& r : records) {
    age += r.age;
    percent += r.base_visit().percent;
    fvc += r.base_visit().fvc_ml;
  }
  s.age_mean = age / n;
  s.percent_mean = percent / n;
  s.fvc_mean = fvc / n;
  double age_v = 0, percent_v = 0, fvc_v = 0;
  for (const auto& r : records) {
    age_v += (r.age - s.age_mean) * (r.age - s.age_mean);
    percent_v += (r.base_visit().percent - s.percent_mean) *
                 (r.base_visit().percent - s.percent_mean);
    fvc_v += (r.base_visit().fvc_ml - s.fvc_mean) *
             (r.base_visit().fvc_ml - s.fvc_mean);
  }
  // Degenerate (constant) columns standardize to 0 via unit std.
  s.age_std = age_v > 0 ? std::sqrt(age_v / n) : 1.0;
  s.percent_std = percent_v > 0 ? std::sqrt(percent_v / n) : 1.0;
  s.fvc_std = fvc_v > 0 ? std::sqrt(fvc_v / n) : 1.0;
  return s;
}

ClinicalFeatures encode_metadata(const PatientRecord& record,
                                 const FvcVisit& base_visit,
                                 const EncodingStats& stats) {
  if (stats.age_std <= 0 || stats.percent_std <= 0 || stats.fvc_std <= 0) {
    throw PredictorError(PredictorErrc::MissingStats,
                         "encode_metadata: stats must have positive stds");
  }
  ClinicalFeatures f;
  f.age_z = static_cast<float>((record.age - stats.age_mean) / stats.age_std);
  f.sex_male = record.sex == Sex::Male ? 1.f : 0.f;
  f.smoking_onehot[0] = record.smoking == Smoking::CurrentlySmokes ? 1.f : 0.f;
  f.smoking_onehot[1] = record.smoking == Smoking::ExSmoker ? 1.f : 0.f;
  f.smoking_onehot[2] = record.smoking == Smoking::NeverSmoked ? 1.f : 0.f;
  f.percent_z = static_cast<float>((base_visit.percent - stats.percent_mean) /
                                   stats.percent_std);
  f.base_fvc_z =
      static_cast<float>((base_visit.fvc_ml - stats.fvc_mean) / stats.fvc_std);
  f.base_week = base_visit.week;
  return f;
}

double slice_slope(const Eigen::VectorXf& features,
                   const ClinicalFeatures& clinical, const Tensor32& head_w,
                   const Tensor32& head_b) {
  const int feat_dim = static_cast<int>(features.size());
  const int total = feat_dim + ClinicalFeatures::kDim;
  if (head_w.rank() != 2 || head_w.dim(0) != total || head_w.dim(1) != 1 ||
      head_b.numel() != 1) {
    throw TensorError(TensorErrc::ShapeMismatch,
                      "slice_slope: head parameter dims");
  }
  Tensor32 x({1, total});
  for (int i = 0; i < feat_dim; ++i) x[i] = features[i];
  const auto clin = clinical.vector();
  for (int i = 0; i < ClinicalFeatures::kDim; ++i) x[feat_dim + i] = clin[i];
  auto out = dense(Var<float>::constant(std::move(x)),
                   Var<float>::constant(head_w), Var<float>::constant(head_b));
  return static_cast<double>(out.value()[0]);
}

double aggregate_slopes(const std::vector<double>& slopes) {
  if (slopes.empty()) {
    throw PredictorError(PredictorErrc::EmptyInput,
                         "aggregate_slopes: no slopes");
  }
  std::vector<double> v = slopes;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

namespace {

// Linear-interpolated percentile of a sorted sample (R type 7).
double percentile_sorted(const std::vector<double>& v, double p) {
  const std::size_t n = v.size();
  if (n == 1) return v[0];
  const double h = p * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = h - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace

double slope_iqr(std::vector<double> slopes) {
  if (slopes.empty()) {
    throw PredictorError(PredictorErrc::EmptyInput, "slope_iqr: no slopes");
  }
  std::sort(slopes.begin(), slopes.end());
  return percentile_sorted(slopes, 0.75) - percentile_sorted(slopes, 0.25);
}

void validate(const EnsembleConfig& cfg) {
  if (cfg.cnn_weight < 0 || cfg.cnn_weight > 1) {
    throw std::invalid_argument("ensemble: cnn_weight must be in [0, 1]");
  }
  if (cfg.sigma0 < 0 || cfg.sigma_week_gain < 0 ||
      cfg.sigma_dispersion_gain < 0) {
    throw std::invalid_argument("ensemble: sigma terms must be >= 0");
  }
}

double ensemble_fvc(double fvc_cnn, double fvc_enet, const EnsembleConfig& cfg) {
  validate(cfg);
  const double v = cfg.cnn_weight * fvc_cnn + (1.0 - cfg.cnn_weight) * fvc_enet;
  return std::max(v, 1.0);
}

double estimate_sigma(double weeks_elapsed, double slope_iqr,
                      const EnsembleConfig& cfg) {
  validate(cfg);
  const double sigma = cfg.sigma0 + cfg.sigma_week_gain * weeks_elapsed +
                       cfg.sigma_dispersion_gain * slope_iqr * weeks_elapsed;
  return std::max(sigma, 1.0);
}

Eigen::VectorXd build_meta_features(const PatientRecord& record,
                                    int target_week) {
  const auto& base = record.base_visit();
  Eigen::VectorXd f(kMetaFeatureDim);
  f << base.fvc_ml, base.percent, static_cast<double>(record.age),
      record.sex == Sex::Male ? 1.0 : 0.0,
      record.smoking == Smoking::CurrentlySmokes ? 1.0 : 0.0,
      record.smoking == Smoking::ExSmoker ? 1.0 : 0.0,
      record.smoking == Smoking::NeverSmoked ? 1.0 : 0.0,
      static_cast<double>(target_week - base.week);
  return f;
}

namespace {

Tensor32 slices_to_batch(const std::vector<NormalizedSlice>& slices) {
  const int n = static_cast<int>(slices.size());
  const int h = slices.front().rows();
  const int w = slices.front().cols();
  Tensor32 x({n, 1, h, w});
  for (int i = 0; i < n; ++i) {
    if (slices[static_cast<std::size_t>(i)].rows() != h ||
        slices[static_cast<std::size_t>(i)].cols() != w) {
      throw TensorError(TensorErrc::ShapeMismatch,
                        "slice batch: inconsistent dims");
    }
    std::copy(slices[static_cast<std::size_t>(i)].values.data(),
              slices[static_cast<std::size_t>(i)].values.data() +
                  static_cast<std::int64_t>(h) * w,
              x.data() + static_cast<std::int64_t>(i) * h * w);
  }
  return x;
}

Tensor32 clinical_rows(const std::vector<ClinicalFeatures>& clin) {
  const int n = static_cast<int>(clin.size());
  Tensor32 t({n, ClinicalFeatures::kDim});
  for (int i = 0; i < n; ++i) {
    const auto v = clin[static_cast<std::size_t>(i)].vector();
    for (int j = 0; j < ClinicalFeatures::kDim; ++j) {
      t[i * ClinicalFeatures::kDim + j] = v[j];
    }
  }
  return t;
}

// Shared forward: batch of slices + per-row clinical features -> slopes.
Var<float> slopes_forward(const Tensor32& batch, const Tensor32& clinical,
                          const BackboneConfig& cfg,
                          const ParamStore<float>& params) {
  auto x = Var<float>::constant(batch);
  auto feats = backbone_forward(x, cfg, params);
  auto fused = concat<float>({feats, Var<float>::constant(clinical)}, 1);
  return dense(fused, params.at(kHeadWeightName), params.at(kHeadBiasName));
}

}  // namespace

std::vector<double> slice_slopes(const FibrosisModel& model,
                                 const std::vector<NormalizedSlice>& slices,
                                 const ClinicalFeatures& clinical) {
  if (slices.empty()) {
    throw PredictorError(PredictorErrc::EmptyInput, "slice_slopes: no slices");
  }
  const Tensor32 batch = slices_to_batch(slices);
  const Tensor32 clin = clinical_rows(
      std::vector<ClinicalFeatures>(slices.size(), clinical));
  auto out = slopes_forward(batch, clin, model.backbone_cfg, model.params);
  std::vector<double> slopes(slices.size());
  for (std::size_t i = 0; i < slices.size(); ++i) {
    slopes[i] = static_cast<double>(out.value()[static_cast<std::int64_t>(i)]);
  }
  return slopes;
}

double predict_cnn_fvc(const FibrosisModel& model,
                       const std::vector<NormalizedSlice>& slices,
                       const PatientRecord& record, int target_week) {
  const auto& base = record.base_visit();
  const auto clinical = encode_metadata(record, base, model.stats);
  const auto slopes = slice_slopes(model, slices, clinical);
  const double slope = aggregate_slopes(slopes);
  return extrapolate_fvc(base.fvc_ml, base.week, slope, target_week);
}

FvcPrediction predict_patient(const CtVolume& volume,
                              const PatientRecord& record, int target_week,
                              const FibrosisModel& model) {
  const auto slices = preprocess_volume(volume, model.preprocess_cfg);
  if (slices.empty()) {
    throw PredictorError(PredictorErrc::EmptyInput,
                         "predict_patient: no slices after selection");
  }
  const auto& base = record.base_visit();
  const auto clinical = encode_metadata(record, base, model.stats);
  const auto slopes = slice_slopes(model, slices, clinical);
  const double slope = aggregate_slopes(slopes);
  const double fvc_cnn =
      extrapolate_fvc(base.fvc_ml, base.week, slope, target_week);
  const double fvc_enet =
      predict_elastic_net(model.enet, build_meta_features(record, target_week));

  FvcPrediction pred;
  pred.target_week = target_week;
  pred.fvc_ml = ensemble_fvc(fvc_cnn, fvc_enet, model.ensemble);
  const double weeks_elapsed = std::abs(target_week - base.week);
  if (model.ensemble.sigma_source == SigmaSource::Quantile) {
    pred.sigma_ml = std::max(
        sigma_from_quantiles(model.quantile,
                             build_meta_features(record, target_week)),
        1.0);
  } else {
    pred.sigma_ml = estimate_sigma(weeks_elapsed, slope_iqr(slopes),
                                   model.ensemble);
  }
  return pred;
}

namespace {

struct TrainingSample {
  std::size_t patient;
  std::size_t visit;  // index > 0 (non-baseline)
};

}  // namespace

FibrosisModel train(const std::vector<CohortEntry>& cohort,
                    const TrainConfig& cfg, TrainReport* report) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    if (cohort[i].record.visits.size() >= 2) eligible.push_back(i);
  }
  if (eligible.empty()) {
    throw PredictorError(PredictorErrc::InsufficientVisits,
                         "train: need at least one patient with >= 2 visits");
  }
  if (cfg.batch_size < 1 || cfg.steps < 0) {
    throw std::invalid_argument("train: bad steps/batch_size");
  }

  FibrosisModel model;
  model.backbone_cfg = cfg.backbone;
  model.preprocess_cfg = cfg.preprocess;
  model.ensemble = cfg.ensemble;

  std::vector<PatientRecord> records;
  records.reserve(cohort.size());
  for (const auto& e : cohort) records.push_back(e.record);
  model.stats = compute_encoding_stats(records);

  // Meta-regressors on every recorded visit.
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> targets;
  for (const auto& e : cohort) {
    for (const auto& v : e.record.visits) {
      rows.push_back(build_meta_features(e.record, v.week));
      targets.push_back(v.fvc_ml);
    }
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), kMetaFeatureDim);
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    y[static_cast<Eigen::Index>(i)] = targets[i];
  }
  model.enet = fit_elastic_net(X, y, cfg.enet_lambda, cfg.enet_alpha);
  model.quantile = fit_quantile(X, y, cfg.quantiles);

  // Per-patient preprocessed slices and clinical encodings.
  std::vector<std::vector<NormalizedSlice>> slices(cohort.size());
  std::vector<ClinicalFeatures> clinical(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    slices[i] = preprocess_volume(cohort[i].volume, cfg.preprocess);
    clinical[i] =
        encode_metadata(cohort[i].record, cohort[i].record.base_visit(),
                        model.stats);
  }

  std::mt19937_64 rng(cfg.seed);
  init_backbone_params(model.params, cfg.backbone, rng);
  // Zero head init: the first-step slope is 0 (prediction = base FVC), so
  // early training is not chasing projection noise.
  const int head_in = cfg.backbone.feature_dim + ClinicalFeatures::kDim;
  model.params.create(kHeadWeightName, Tensor32({head_in, 1}));
  model.params.create(kHeadBiasName, Tensor32({1}));

  // Two optimizer groups: slope head at lr * head_lr_multiplier.
  std::vector<Tensor32*> body_params, head_params;
  std::vector<std::size_t> body_idx, head_idx;
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    if (model.params.names()[i].rfind("head.", 0) == 0) {
      head_idx.push_back(i);
    } else {
      body_idx.push_back(i);
    }
  }
  AdamState<float> body_state, head_state;

  const int h = cfg.preprocess.target_height;
  const int w = cfg.preprocess.target_width;
  // Patients are drawn from a reshuffled round-robin so every batch covers
  // the cohort as evenly as possible; visits and slices stay uniform.
  std::vector<std::size_t> patient_order = eligible;
  std::size_t order_pos = patient_order.size();
  for (int step = 0; step < cfg.steps; ++step) {
    // Sample (patient, non-baseline visit, slice) triples.
    Tensor32 batch({cfg.batch_size, 1, h, w});
    Tensor32 clin({cfg.batch_size, ClinicalFeatures::kDim});
    Tensor32 base_fvc({cfg.batch_size, 1});
    Tensor32 week_delta({cfg.batch_size, 1});
    Tensor32 target({cfg.batch_size, 1});
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (order_pos >= patient_order.size()) {
        std::shuffle(patient_order.begin(), patient_order.end(), rng);
        order_pos = 0;
      }
      const std::size_t p = patient_order[order_pos++];
      const auto& rec = cohort[p].record;
      std::uniform_int_distribution<std::size_t> pick_visit(
          1, rec.visits.size() - 1);
      const std::size_t v = pick_visit(rng);
      std::uniform_int_distribution<std::size_t> pick_slice(
          0, slices[p].size() - 1);
      const auto& sl = slices[p][pick_slice(rng)];

      std::copy(sl.values.data(),
                sl.values.data() + static_cast<std::int64_t>(h) * w,
                batch.data() + static_cast<std::int64_t>(b) * h * w);
      const auto cv = clinical[p].vector();
      for (int j = 0; j < ClinicalFeatures::kDim; ++j) {
        clin[b * ClinicalFeatures::kDim + j] = cv[j];
      }
      base_fvc[b] = static_cast<float>(rec.base_visit().fvc_ml);
      week_delta[b] =
          static_cast<float>(rec.visits[v].week - rec.base_visit().week);
      target[b] = static_cast<float>(rec.visits[v].fvc_ml);
    }

    model.params.zero_grad();
    auto slopes = slopes_forward(batch, clin, cfg.backbone, model.params);
    auto pred = residual_add(mul(slopes, Var<float>::constant(week_delta)),
                             Var<float>::constant(base_fvc));
    auto loss = mae_loss(pred, Var<float>::constant(target));
    backward(loss);
    if (report) report->loss_history.push_back(loss.value()[0]);

    const auto lr = static_cast<float>(lr_at(step, cfg.lr));
    auto apply = [&](const std::vector<std::size_t>& idx,
                     AdamState<float>& state, float group_lr) {
      std::vector<Tensor32*> ps;
      std::vector<const Tensor32*> gs;
      ps.reserve(idx.size());
      gs.reserve(idx.size());
      for (std::size_t i : idx) {
        auto var = model.params.var(i);
        ps.push_back(&var.node()->value);
        gs.push_back(&var.node()->grad);
      }
      adam_step(ps, gs, state, group_lr);
    };
    apply(body_idx, body_state, lr);
    apply(head_idx, head_state,
          lr * static_cast<float>(cfg.head_lr_multiplier));
  }

  if (report) report->train_mae = cnn_training_mae(model, cohort);
  return model;
}

double cnn_training_mae(const FibrosisModel& model,
                        const std::vector<CohortEntry>& cohort) {
  double total = 0.0;
  int count = 0;
  for (const auto& e : cohort) {
    if (e.record.visits.size() < 2) continue;
    const auto slices = preprocess_volume(e.volume, model.preprocess_cfg);
    for (std::size_t v = 1; v < e.record.visits.size(); ++v) {
      const auto& visit = e.record.visits[v];
      const double pred =
          predict_cnn_fvc(model, slices, e.record, visit.week);
      total += std::abs(pred - visit.fvc_ml);
      ++count;
    }
  }
  if (count == 0) {
    throw PredictorError(PredictorErrc::InsufficientVisits,
                         "cnn_training_mae: no non-baseline visits");
  }
  return total / count;
}

}  // namespace fnet
