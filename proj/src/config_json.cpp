#include "fnet/config_json.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

using nlohmann::json;

namespace fnet {

namespace {

json parse(const std::string& text) {
  return json::parse(text);  // throws json::parse_error with position info
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys,
                    const char* what) {
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* k : keys) {
      if (key == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw std::invalid_argument(std::string(what) + ": unknown key '" + key +
                                  "'");
    }
  }
}

template <typename T>
void get_if_present(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vector_from_json(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = a.at(i).get<double>();
  }
  return v;
}

}  // namespace

std::string to_json(const PreprocessConfig& cfg) {
  json j{{"window_level", cfg.window_level},
         {"window_width", cfg.window_width},
         {"lower_fraction", cfg.lower_fraction},
         {"target_size", {cfg.target_height, cfg.target_width}},
         {"padding_sentinel_threshold", cfg.padding_sentinel_threshold},
         {"air_hu", cfg.air_hu},
         {"calibration_tolerance", cfg.calibration_tolerance}};
  return j.dump(2) + "\n";
}

PreprocessConfig preprocess_config_from_json(const std::string& text) {
  const json j = parse(text);
  reject_unknown(j,
                 {"window_level", "window_width", "lower_fraction",
                  "target_size", "padding_sentinel_threshold", "air_hu",
                  "calibration_tolerance"},
                 "preprocess config");
  PreprocessConfig cfg;
  get_if_present(j, "window_level", cfg.window_level);
  get_if_present(j, "window_width", cfg.window_width);
  get_if_present(j, "lower_fraction", cfg.lower_fraction);
  if (j.contains("target_size")) {
    const auto& t = j.at("target_size");
    if (!t.is_array() || t.size() != 2) {
      throw std::invalid_argument("preprocess config: target_size is [h, w]");
    }
    cfg.target_height = t.at(0).get<int>();
    cfg.target_width = t.at(1).get<int>();
  }
  get_if_present(j, "padding_sentinel_threshold",
                 cfg.padding_sentinel_threshold);
  get_if_present(j, "air_hu", cfg.air_hu);
  get_if_present(j, "calibration_tolerance", cfg.calibration_tolerance);
  validate(cfg);
  return cfg;
}

std::string to_json(const BackboneConfig& cfg) {
  json stages = json::array();
  for (const auto& s : cfg.stages) {
    stages.push_back(json{{"in_channels", s.in_channels},
                          {"mid_channels", s.mid_channels},
                          {"out_channels", s.out_channels},
                          {"stride", s.stride},
                          {"branches", s.branches}});
  }
  json taps = json::array();
  for (const auto& t : cfg.hub_taps) {
    taps.push_back(json::array({t.source, t.target}));
  }
  json j{{"input_size", {cfg.input_height, cfg.input_width}},
         {"stem",
          {{"out_channels", cfg.stem.out_channels},
           {"kernel", cfg.stem.kernel},
           {"stride", cfg.stem.stride},
           {"pad", cfg.stem.pad}}},
         {"stages", stages},
         {"hub_taps", taps},
         {"feature_dim", cfg.feature_dim}};
  return j.dump(2) + "\n";
}

BackboneConfig backbone_config_from_json(const std::string& text) {
  const json j = parse(text);
  reject_unknown(j, {"input_size", "stem", "stages", "hub_taps", "feature_dim"},
                 "backbone config");
  BackboneConfig cfg = BackboneConfig::desk_default();
  if (j.contains("input_size")) {
    cfg.input_height = j.at("input_size").at(0).get<int>();
    cfg.input_width = j.at("input_size").at(1).get<int>();
  }
  if (j.contains("stem")) {
    const auto& s = j.at("stem");
    reject_unknown(s, {"out_channels", "kernel", "stride", "pad"}, "stem");
    get_if_present(s, "out_channels", cfg.stem.out_channels);
    get_if_present(s, "kernel", cfg.stem.kernel);
    get_if_present(s, "stride", cfg.stem.stride);
    get_if_present(s, "pad", cfg.stem.pad);
  }
  if (j.contains("stages")) {
    cfg.stages.clear();
    for (const auto& s : j.at("stages")) {
      reject_unknown(
          s, {"in_channels", "mid_channels", "out_channels", "stride", "branches"},
          "stage");
      PrpeBlockConfig blk;
      get_if_present(s, "in_channels", blk.in_channels);
      get_if_present(s, "mid_channels", blk.mid_channels);
      get_if_present(s, "out_channels", blk.out_channels);
      get_if_present(s, "stride", blk.stride);
      get_if_present(s, "branches", blk.branches);
      cfg.stages.push_back(blk);
    }
  }
  if (j.contains("hub_taps")) {
    cfg.hub_taps.clear();
    for (const auto& t : j.at("hub_taps")) {
      cfg.hub_taps.push_back(HubTap{t.at(0).get<int>(), t.at(1).get<int>()});
    }
  }
  get_if_present(j, "feature_dim", cfg.feature_dim);
  validate(cfg);
  return cfg;
}

std::string to_json(const EnsembleConfig& cfg) {
  json j{{"cnn_weight", cfg.cnn_weight},
         {"sigma0", cfg.sigma0},
         {"sigma_week_gain", cfg.sigma_week_gain},
         {"sigma_dispersion_gain", cfg.sigma_dispersion_gain},
         {"sigma_source",
          cfg.sigma_source == SigmaSource::Quantile ? "quantile" : "formula"}};
  return j.dump(2) + "\n";
}

EnsembleConfig ensemble_config_from_json(const std::string& text) {
  const json j = parse(text);
  reject_unknown(j,
                 {"cnn_weight", "sigma0", "sigma_week_gain",
                  "sigma_dispersion_gain", "sigma_source"},
                 "ensemble config");
  EnsembleConfig cfg;
  get_if_present(j, "cnn_weight", cfg.cnn_weight);
  get_if_present(j, "sigma0", cfg.sigma0);
  get_if_present(j, "sigma_week_gain", cfg.sigma_week_gain);
  get_if_present(j, "sigma_dispersion_gain", cfg.sigma_dispersion_gain);
  if (j.contains("sigma_source")) {
    const auto s = j.at("sigma_source").get<std::string>();
    if (s == "formula") {
      cfg.sigma_source = SigmaSource::Formula;
    } else if (s == "quantile") {
      cfg.sigma_source = SigmaSource::Quantile;
    } else {
      throw std::invalid_argument("ensemble config: sigma_source must be "
                                  "'formula' or 'quantile'");
    }
  }
  validate(cfg);
  return cfg;
}

std::string to_json(const SynthConfig& cfg) {
  json j{{"seed", cfg.seed},
         {"n_patients", cfg.n_patients},
         {"age_mean", cfg.age_mean},
         {"age_std", cfg.age_std},
         {"p_male", cfg.p_male},
         {"smoking_probs",
          {cfg.smoking_probs[0], cfg.smoking_probs[1], cfg.smoking_probs[2]}},
         {"slope_mean", cfg.slope_mean},
         {"slope_std", cfg.slope_std},
         {"base_fvc_mean", cfg.base_fvc_mean},
         {"base_fvc_std", cfg.base_fvc_std},
         {"visit_weeks", cfg.visit_weeks},
         {"fvc_noise_std", cfg.fvc_noise_std},
         {"slices_per_volume", cfg.slices_per_volume},
         {"height", cfg.height},
         {"width", cfg.width},
         {"plant_padding", cfg.plant_padding}};
  return j.dump(2) + "\n";
}

SynthConfig synth_config_from_json(const std::string& text) {
  const json j = parse(text);
  reject_unknown(j,
                 {"seed", "n_patients", "age_mean", "age_std", "p_male",
                  "smoking_probs", "slope_mean", "slope_std", "base_fvc_mean",
                  "base_fvc_std", "visit_weeks", "fvc_noise_std",
                  "slices_per_volume", "height", "width", "plant_padding"},
                 "synth config");
  SynthConfig cfg;
  get_if_present(j, "seed", cfg.seed);
  get_if_present(j, "n_patients", cfg.n_patients);
  get_if_present(j, "age_mean", cfg.age_mean);
  get_if_present(j, "age_std", cfg.age_std);
  get_if_present(j, "p_male", cfg.p_male);
  if (j.contains("smoking_probs")) {
    const auto& p = j.at("smoking_probs");
    for (int i = 0; i < 3; ++i) cfg.smoking_probs[i] = p.at(i).get<double>();
  }
  get_if_present(j, "slope_mean", cfg.slope_mean);
  get_if_present(j, "slope_std", cfg.slope_std);
  get_if_present(j, "base_fvc_mean", cfg.base_fvc_mean);
  get_if_present(j, "base_fvc_std", cfg.base_fvc_std);
  get_if_present(j, "visit_weeks", cfg.visit_weeks);
  get_if_present(j, "fvc_noise_std", cfg.fvc_noise_std);
  get_if_present(j, "slices_per_volume", cfg.slices_per_volume);
  get_if_present(j, "height", cfg.height);
  get_if_present(j, "width", cfg.width);
  get_if_present(j, "plant_padding", cfg.plant_padding);
  validate(cfg);
  return cfg;
}

std::string to_json(const EncodingStats& stats) {
  json j{{"age_mean", stats.age_mean},         {"age_std", stats.age_std},
         {"percent_mean", stats.percent_mean}, {"percent_std", stats.percent_std},
         {"fvc_mean", stats.fvc_mean},         {"fvc_std", stats.fvc_std}};
  return j.dump(2) + "\n";
}

EncodingStats encoding_stats_from_json(const std::string& text) {
  const json j = parse(text);
  reject_unknown(j,
                 {"age_mean", "age_std", "percent_mean", "percent_std",
                  "fvc_mean", "fvc_std"},
                 "encoding stats");
  EncodingStats s;
  get_if_present(j, "age_mean", s.age_mean);
  get_if_present(j, "age_std", s.age_std);
  get_if_present(j, "percent_mean", s.percent_mean);
  get_if_present(j, "percent_std", s.percent_std);
  get_if_present(j, "fvc_mean", s.fvc_mean);
  get_if_present(j, "fvc_std", s.fvc_std);
  return s;
}

std::string to_json(const ElasticNetModel& model) {
  json j{{"coefficients", vector_to_json(model.coefficients)},
         {"intercept", model.intercept},
         {"lambda", model.lambda},
         {"alpha", model.alpha},
         {"feature_means", vector_to_json(model.feature_means)},
         {"feature_stds", vector_to_json(model.feature_stds)},
         {"converged", model.converged},
         {"sweeps", model.sweeps}};
  return j.dump(2) + "\n";
}

ElasticNetModel elastic_net_from_json(const std::string& text) {
  const json j = parse(text);
  reject_unknown(j,
                 {"coefficients", "intercept", "lambda", "alpha",
                  "feature_means", "feature_stds", "converged", "sweeps"},
                 "elastic net model");
  ElasticNetModel m;
  m.coefficients = vector_from_json(j.at("coefficients"));
  m.intercept = j.at("intercept").get<double>();
  get_if_present(j, "lambda", m.lambda);
  get_if_present(j, "alpha", m.alpha);
  m.feature_means = vector_from_json(j.at("feature_means"));
  m.feature_stds = vector_from_json(j.at("feature_stds"));
  get_if_present(j, "converged", m.converged);
  get_if_present(j, "sweeps", m.sweeps);
  return m;
}

std::string to_json(const QuantileModel& model) {
  json weights = json::array();
  for (Eigen::Index q = 0; q < model.weights.rows(); ++q) {
    weights.push_back(vector_to_json(model.weights.row(q).transpose()));
  }
  json j{{"quantiles", model.quantiles},
         {"weights", weights},
         {"intercepts", vector_to_json(model.intercepts)},
         {"feature_means", vector_to_json(model.feature_means)},
         {"feature_stds", vector_to_json(model.feature_stds)}};
  return j.dump(2) + "\n";
}

QuantileModel quantile_from_json(const std::string& text) {
  const json j = parse(text);
  reject_unknown(
      j, {"quantiles", "weights", "intercepts", "feature_means", "feature_stds"},
      "quantile model");
  QuantileModel m;
  m.quantiles = j.at("quantiles").get<std::vector<double>>();
  const auto& w = j.at("weights");
  const auto rows = static_cast<Eigen::Index>(w.size());
  const auto cols =
      rows > 0 ? static_cast<Eigen::Index>(w.at(0).size()) : Eigen::Index(0);
  m.weights.resize(rows, cols);
  for (Eigen::Index q = 0; q < rows; ++q) {
    m.weights.row(q) =
        vector_from_json(w.at(static_cast<std::size_t>(q))).transpose();
  }
  m.intercepts = vector_from_json(j.at("intercepts"));
  m.feature_means = vector_from_json(j.at("feature_means"));
  m.feature_stds = vector_from_json(j.at("feature_stds"));
  return m;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << content;
  if (!f) throw std::runtime_error("write failed for " + path);
}

}  // namespace fnet
