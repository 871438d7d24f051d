// fnet: FVC progression prediction from chest CT.
//
// Subcommands run the pipeline end to end on a data directory laid out as
//   <data>/metadata.csv            visit table
//   <data>/<patient>/slice_*.dcm   CT slices
// Every run writes a manifest.json (config snapshot, seed, output hashes)
// into its output directory, and never mutates its inputs.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "fnet/cohort_synth.hpp"
#include "fnet/config_json.hpp"
#include "fnet/explain.hpp"
#include "fnet/model_io.hpp"
#include "fnet/predictor.hpp"
#include "fnet/scoring.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string file_hash(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  std::ostringstream out;
  out << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0')
      << fnv1a64(ss.str());
  return out.str();
}

void require_dir(const std::string& path, const char* what) {
  if (!fs::is_directory(path)) {
    throw ValidationError(std::string(what) + " directory not found: " + path);
  }
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) {
    throw ValidationError(std::string(what) + " file not found: " + path);
  }
}

// Manifest: written last so output hashes cover the final artifacts.
void write_manifest(const fs::path& out_dir, const std::string& command,
                    std::uint64_t seed, const json& config,
                    const std::vector<fs::path>& outputs) {
  json j;
  j["version"] = kVersion;
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = config;
  json hashes = json::object();
  for (const auto& p : outputs) {
    hashes[fs::relative(p, out_dir).string()] = file_hash(p);
  }
  j["outputs"] = hashes;
  fnet::write_text_file((out_dir / "manifest.json").string(), j.dump(2) + "\n");
}

struct CommonOpts {
  std::string out_dir;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--out", opts.out_dir, "output directory")
      ->required()
      ->envname("FNET_OUT");
  cmd->add_option("--threads", opts.threads,
                  "worker threads (this build runs sequentially)")
      ->check(CLI::PositiveNumber)
      ->envname("FNET_THREADS");
}

fnet::PreprocessConfig load_preprocess_config(const std::string& path) {
  if (path.empty()) return fnet::PreprocessConfig{};
  require_file(path, "preprocess config");
  return fnet::preprocess_config_from_json(fnet::read_text_file(path));
}

// Per-key preprocess overrides: values given on the command line win over
// the config file.
struct PreprocessFlags {
  fnet::PreprocessConfig staged;
  CLI::Option* window_level = nullptr;
  CLI::Option* window_width = nullptr;
  CLI::Option* lower_fraction = nullptr;
  CLI::Option* target_height = nullptr;
  CLI::Option* target_width = nullptr;
  CLI::Option* padding_threshold = nullptr;
  CLI::Option* air_hu = nullptr;
  CLI::Option* calibration_tolerance = nullptr;

  void attach(CLI::App* cmd) {
    window_level =
        cmd->add_option("--window-level", staged.window_level, "HU");
    window_width =
        cmd->add_option("--window-width", staged.window_width, "HU");
    lower_fraction = cmd->add_option("--lower-fraction", staged.lower_fraction,
                                     "inferior fraction of slices kept");
    target_height =
        cmd->add_option("--target-height", staged.target_height, "px");
    target_width =
        cmd->add_option("--target-width", staged.target_width, "px");
    padding_threshold =
        cmd->add_option("--padding-threshold",
                        staged.padding_sentinel_threshold, "HU");
    air_hu = cmd->add_option("--air-hu", staged.air_hu, "HU");
    calibration_tolerance = cmd->add_option(
        "--calibration-tolerance", staged.calibration_tolerance, "HU");
  }

  fnet::PreprocessConfig apply(fnet::PreprocessConfig cfg) const {
    if (window_level->count()) cfg.window_level = staged.window_level;
    if (window_width->count()) cfg.window_width = staged.window_width;
    if (lower_fraction->count()) cfg.lower_fraction = staged.lower_fraction;
    if (target_height->count()) cfg.target_height = staged.target_height;
    if (target_width->count()) cfg.target_width = staged.target_width;
    if (padding_threshold->count()) {
      cfg.padding_sentinel_threshold = staged.padding_sentinel_threshold;
    }
    if (air_hu->count()) cfg.air_hu = staged.air_hu;
    if (calibration_tolerance->count()) {
      cfg.calibration_tolerance = staged.calibration_tolerance;
    }
    fnet::validate(cfg);
    return cfg;
  }
};

std::string format_fvc_csv_value(double v) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.1f", v);
  return std::string(buf.data());
}

// --- synth -------------------------------------------------------------

struct SynthOpts {
  CommonOpts common;
  fnet::SynthConfig cfg;
  std::string config_path;
};

int run_synth(const SynthOpts& opts) {
  fnet::SynthConfig cfg = opts.cfg;
  if (!opts.config_path.empty()) {
    require_file(opts.config_path, "synth config");
    cfg = fnet::synth_config_from_json(fnet::read_text_file(opts.config_path));
    cfg.seed = opts.cfg.seed;  // CLI flags still override the file
    cfg.n_patients = opts.cfg.n_patients;
  }
  const auto cohort = fnet::to_entries(fnet::sample_cohort(cfg));
  fnet::export_cohort(cohort, opts.common.out_dir);

  std::vector<fs::path> outputs = {fs::path(opts.common.out_dir) /
                                   "metadata.csv"};
  for (const auto& e : cohort) {
    for (std::size_t s = 0; s < e.volume.slices.size(); ++s) {
      std::ostringstream name;
      name << "slice_" << std::setw(3) << std::setfill('0') << s << ".dcm";
      outputs.push_back(fs::path(opts.common.out_dir) / e.record.patient_id /
                        name.str());
    }
  }
  write_manifest(opts.common.out_dir, "synth", cfg.seed,
                 json::parse(fnet::to_json(cfg)), outputs);
  std::cout << "synth: wrote " << cohort.size() << " patients to "
            << opts.common.out_dir << "\n";
  return 0;
}

// --- ingest ------------------------------------------------------------

struct IngestOpts {
  CommonOpts common;
  std::string data_dir;
};

int run_ingest(const IngestOpts& opts) {
  require_dir(opts.data_dir, "data");
  require_file((fs::path(opts.data_dir) / "metadata.csv").string(), "metadata");
  const auto cohort = fnet::load_cohort(opts.data_dir);

  std::size_t visits = 0, slices = 0;
  for (const auto& e : cohort) {
    visits += e.record.visits.size();
    slices += e.volume.slices.size();
  }
  fs::create_directories(opts.common.out_dir);
  json summary{{"patients", cohort.size()},
               {"visits", visits},
               {"slices", slices}};
  const fs::path summary_path = fs::path(opts.common.out_dir) / "summary.json";
  fnet::write_text_file(summary_path.string(), summary.dump(2) + "\n");
  write_manifest(opts.common.out_dir, "ingest", 0,
                 json{{"data", opts.data_dir}}, {summary_path});
  std::cout << summary.dump(2) << "\n";
  return 0;
}

// --- preprocess ----------------------------------------------------------

struct PreprocessOpts {
  CommonOpts common;
  std::string data_dir;
  std::string preprocess_path;
  PreprocessFlags flags;
};

int run_preprocess(const PreprocessOpts& opts) {
  require_dir(opts.data_dir, "data");
  const auto cfg =
      opts.flags.apply(load_preprocess_config(opts.preprocess_path));
  const auto cohort = fnet::load_cohort(opts.data_dir);

  fnet::ParamStore<float> tensors;
  for (const auto& e : cohort) {
    const auto slices = fnet::preprocess_volume(e.volume, cfg);
    for (std::size_t s = 0; s < slices.size(); ++s) {
      fnet::Tensor32 t({slices[s].rows(), slices[s].cols()});
      std::copy(slices[s].values.data(),
                slices[s].values.data() + t.numel(), t.data());
      std::ostringstream name;
      name << e.record.patient_id << "/slice" << std::setw(3)
           << std::setfill('0') << s;
      tensors.create(name.str(), std::move(t));
    }
  }
  fs::create_directories(opts.common.out_dir);
  const fs::path bin_path = fs::path(opts.common.out_dir) / "preprocessed.bin";
  fnet::save_params(tensors, bin_path.string());
  write_manifest(opts.common.out_dir, "preprocess", 0,
                 json::parse(fnet::to_json(cfg)), {bin_path});
  std::cout << "preprocess: wrote " << tensors.size() << " slices to "
            << bin_path.string() << "\n";
  return 0;
}

// --- train ---------------------------------------------------------------

struct TrainOpts {
  CommonOpts common;
  std::string data_dir;
  fnet::TrainConfig cfg;
  std::string backbone_path;
  std::string preprocess_path;
  std::string ensemble_path;
  PreprocessFlags flags;
};

json train_config_json(const fnet::TrainConfig& cfg) {
  return json{{"steps", cfg.steps},
              {"batch_size", cfg.batch_size},
              {"seed", cfg.seed},
              {"base_lr", cfg.lr.base_lr},
              {"lr_decay", cfg.lr.decay},
              {"lr_decay_interval", cfg.lr.decay_interval},
              {"head_lr_multiplier", cfg.head_lr_multiplier},
              {"enet_lambda", cfg.enet_lambda},
              {"enet_alpha", cfg.enet_alpha},
              {"backbone", json::parse(fnet::to_json(cfg.backbone))},
              {"preprocess", json::parse(fnet::to_json(cfg.preprocess))},
              {"ensemble", json::parse(fnet::to_json(cfg.ensemble))}};
}

int run_train(const TrainOpts& opts) {
  require_dir(opts.data_dir, "data");
  fnet::TrainConfig cfg = opts.cfg;
  if (!opts.backbone_path.empty()) {
    require_file(opts.backbone_path, "backbone config");
    cfg.backbone = fnet::backbone_config_from_json(
        fnet::read_text_file(opts.backbone_path));
  }
  cfg.preprocess =
      opts.flags.apply(load_preprocess_config(opts.preprocess_path));
  if (!opts.ensemble_path.empty()) {
    require_file(opts.ensemble_path, "ensemble config");
    cfg.ensemble = fnet::ensemble_config_from_json(
        fnet::read_text_file(opts.ensemble_path));
  }
  if (cfg.backbone.input_height != cfg.preprocess.target_height ||
      cfg.backbone.input_width != cfg.preprocess.target_width) {
    throw ValidationError(
        "backbone input_size must match preprocess target_size");
  }

  const auto cohort = fnet::load_cohort(opts.data_dir);
  fnet::TrainReport report;
  const auto model = fnet::train(cohort, cfg, &report);
  fnet::save_model(model, opts.common.out_dir);

  json rep{{"train_mae_ml", report.train_mae},
           {"steps", cfg.steps},
           {"final_loss_ml",
            report.loss_history.empty() ? 0.0 : report.loss_history.back()}};
  const fs::path report_path =
      fs::path(opts.common.out_dir) / "train_report.json";
  fnet::write_text_file(report_path.string(), rep.dump(2) + "\n");

  std::vector<fs::path> outputs = {report_path};
  for (const char* f : {"params.bin", "backbone.json", "preprocess.json",
                        "stats.json", "ensemble.json", "enet.json",
                        "quantile.json"}) {
    outputs.push_back(fs::path(opts.common.out_dir) / f);
  }
  write_manifest(opts.common.out_dir, "train", cfg.seed,
                 train_config_json(cfg), outputs);
  std::cout << "train: MAE " << report.train_mae << " ml over training visits"
            << "\n";
  return 0;
}

// --- predict ---------------------------------------------------------------

struct PredictOpts {
  CommonOpts common;
  std::string data_dir;
  std::string model_dir;
  std::vector<int> weeks;
  bool at_visits = false;
};

int run_predict(const PredictOpts& opts) {
  require_dir(opts.data_dir, "data");
  require_dir(opts.model_dir, "model");
  if (!opts.at_visits && opts.weeks.empty()) {
    throw ValidationError("predict: give --weeks or --at-visits");
  }
  const auto model = fnet::load_model(opts.model_dir);
  const auto cohort = fnet::load_cohort(opts.data_dir);

  fs::create_directories(opts.common.out_dir);
  std::ostringstream pred_csv;
  pred_csv << "Patient_Week,FVC,Confidence\n";
  std::ostringstream truth_csv;
  truth_csv << "Patient_Week,FVC\n";

  for (const auto& e : cohort) {
    std::vector<int> weeks = opts.weeks;
    if (opts.at_visits) {
      weeks.clear();
      for (std::size_t v = 1; v < e.record.visits.size(); ++v) {
        weeks.push_back(e.record.visits[v].week);
      }
    }
    for (int week : weeks) {
      const auto pred =
          fnet::predict_patient(e.volume, e.record, week, model);
      pred_csv << e.record.patient_id << "_" << week << ","
               << format_fvc_csv_value(pred.fvc_ml) << ","
               << format_fvc_csv_value(pred.sigma_ml) << "\n";
      if (opts.at_visits) {
        for (const auto& v : e.record.visits) {
          if (v.week == week) {
            truth_csv << e.record.patient_id << "_" << week << ","
                      << format_fvc_csv_value(v.fvc_ml) << "\n";
          }
        }
      }
    }
  }

  const fs::path pred_path = fs::path(opts.common.out_dir) / "predictions.csv";
  fnet::write_text_file(pred_path.string(), pred_csv.str());
  std::vector<fs::path> outputs = {pred_path};
  if (opts.at_visits) {
    const fs::path truth_path = fs::path(opts.common.out_dir) / "truth.csv";
    fnet::write_text_file(truth_path.string(), truth_csv.str());
    outputs.push_back(truth_path);
  }
  json cfg{{"data", opts.data_dir},
           {"model", opts.model_dir},
           {"weeks", opts.weeks},
           {"at_visits", opts.at_visits}};
  write_manifest(opts.common.out_dir, "predict", 0, cfg, outputs);
  std::cout << "predict: wrote " << pred_path.string() << "\n";
  return 0;
}

// --- score -------------------------------------------------------------

struct ScoreOpts {
  std::string pred_path;
  std::string truth_path;
  std::string out_dir;  // optional
};

std::map<std::string, std::vector<double>> read_csv_rows(
    const std::string& path, std::size_t min_fields) {
  std::ifstream f(path);
  std::string line;
  if (!std::getline(f, line)) throw ValidationError("empty csv: " + path);
  std::map<std::string, std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key, field;
    std::getline(ls, key, ',');
    std::vector<double> values;
    while (std::getline(ls, field, ',')) values.push_back(std::stod(field));
    if (values.size() < min_fields) {
      throw ValidationError("short row in " + path + ": " + line);
    }
    rows[key] = values;
  }
  return rows;
}

int run_score(const ScoreOpts& opts) {
  require_file(opts.pred_path, "prediction csv");
  require_file(opts.truth_path, "truth csv");
  const auto preds = read_csv_rows(opts.pred_path, 2);  // FVC, Confidence
  const auto truth = read_csv_rows(opts.truth_path, 1); // FVC

  std::vector<fnet::ScoredPrediction> scored;
  for (const auto& [key, t] : truth) {
    const auto it = preds.find(key);
    if (it == preds.end()) {
      throw ValidationError("missing prediction for " + key);
    }
    scored.push_back(
        fnet::ScoredPrediction{t[0], it->second[0], it->second[1]});
  }
  const double score = fnet::score_cohort(scored);

  std::cout << fnet::render_score_table({{"This run", score}});
  std::cout << std::fixed << std::setprecision(5) << score << "\n";

  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    json rep{{"laplace_log_likelihood", score},
             {"evaluation_points", scored.size()},
             {"reference", json::object()}};
    for (const auto& ref : fnet::reference_scores()) {
      rep["reference"][ref.method] = ref.score;
    }
    const fs::path rp = fs::path(opts.out_dir) / "score_report.json";
    fnet::write_text_file(rp.string(), rep.dump(2) + "\n");
    write_manifest(opts.out_dir, "score", 0,
                   json{{"pred", opts.pred_path}, {"truth", opts.truth_path}},
                   {rp});
  }
  return 0;
}

// --- explain -----------------------------------------------------------

struct ExplainOpts {
  CommonOpts common;
  std::string data_dir;
  std::string model_dir;
  std::string patient_id;
  int slice_index = 0;
  fnet::OcclusionConfig occlusion;
};

int run_explain(const ExplainOpts& opts) {
  require_dir(opts.data_dir, "data");
  require_dir(opts.model_dir, "model");
  const auto model = fnet::load_model(opts.model_dir);
  const auto cohort = fnet::load_cohort(opts.data_dir);

  const fnet::CohortEntry* entry = nullptr;
  for (const auto& e : cohort) {
    if (e.record.patient_id == opts.patient_id) entry = &e;
  }
  if (!entry) {
    throw ValidationError("patient not found: " + opts.patient_id);
  }
  const auto slices = fnet::preprocess_volume(entry->volume, model.preprocess_cfg);
  if (opts.slice_index < 0 ||
      static_cast<std::size_t>(opts.slice_index) >= slices.size()) {
    throw ValidationError("slice index out of range (have " +
                          std::to_string(slices.size()) + " selected slices)");
  }
  const auto& slice = slices[static_cast<std::size_t>(opts.slice_index)];
  const auto clinical =
      fnet::encode_metadata(entry->record, entry->record.base_visit(),
                            model.stats);
  const auto map =
      fnet::occlusion_attribution(model, slice, clinical, opts.occlusion);

  fs::create_directories(opts.common.out_dir);
  std::ostringstream base;
  base << opts.patient_id << "_slice" << std::setw(3) << std::setfill('0')
       << opts.slice_index;
  const fs::path overlay_path =
      fs::path(opts.common.out_dir) / (base.str() + "_overlay.pgm");
  fnet::render_overlay(slice, map, overlay_path.string());

  // Attribution alone, normalized to full range.
  fnet::NormalizedSlice black;
  black.values = fnet::SliceArray::Zero(slice.rows(), slice.cols());
  const fs::path map_path =
      fs::path(opts.common.out_dir) / (base.str() + "_attribution.pgm");
  fnet::render_overlay(black, map, map_path.string());

  json cfg{{"data", opts.data_dir},
           {"model", opts.model_dir},
           {"patient", opts.patient_id},
           {"slice", opts.slice_index},
           {"patch", opts.occlusion.patch},
           {"stride", opts.occlusion.stride},
           {"baseline_value", opts.occlusion.baseline_value}};
  write_manifest(opts.common.out_dir, "explain", 0, cfg,
                 {overlay_path, map_path});
  std::cout << "explain: wrote " << overlay_path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FVC progression prediction from chest CT"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SynthOpts synth;
  auto* synth_cmd =
      app.add_subcommand("synth", "generate a synthetic cohort");
  add_common(synth_cmd, synth.common);
  synth_cmd->add_option("--seed", synth.cfg.seed, "rng seed")
      ->envname("FNET_SEED");
  synth_cmd->add_option("--patients", synth.cfg.n_patients, "cohort size");
  synth_cmd->add_option("--slices", synth.cfg.slices_per_volume,
                        "CT slices per patient");
  synth_cmd->add_option("--height", synth.cfg.height, "slice height px");
  synth_cmd->add_option("--width", synth.cfg.width, "slice width px");
  synth_cmd->add_option("--noise-std", synth.cfg.fvc_noise_std,
                        "FVC measurement noise, ml");
  synth_cmd->add_flag("--plant-padding", synth.cfg.plant_padding,
                      "plant padding sentinels on the first slice");
  synth_cmd->add_option("--config", synth.config_path, "synth config json");

  IngestOpts ingest;
  auto* ingest_cmd =
      app.add_subcommand("ingest", "validate and summarize a data directory");
  add_common(ingest_cmd, ingest.common);
  ingest_cmd->add_option("--data", ingest.data_dir, "data directory")
      ->required()
      ->envname("FNET_DATA");

  PreprocessOpts preprocess;
  auto* preprocess_cmd = app.add_subcommand(
      "preprocess", "run CT preprocessing and dump model-input tensors");
  add_common(preprocess_cmd, preprocess.common);
  preprocess_cmd->add_option("--data", preprocess.data_dir, "data directory")
      ->required()
      ->envname("FNET_DATA");
  preprocess_cmd->add_option("--preprocess", preprocess.preprocess_path,
                             "preprocess config json");
  preprocess.flags.attach(preprocess_cmd);

  TrainOpts train;
  auto* train_cmd = app.add_subcommand("train", "train the full model");
  add_common(train_cmd, train.common);
  train_cmd->add_option("--data", train.data_dir, "data directory")
      ->required()
      ->envname("FNET_DATA");
  train_cmd->add_option("--steps", train.cfg.steps, "training steps");
  train_cmd->add_option("--batch", train.cfg.batch_size, "batch size");
  train_cmd->add_option("--seed", train.cfg.seed, "rng seed")
      ->envname("FNET_SEED");
  train_cmd->add_option("--base-lr", train.cfg.lr.base_lr, "base learning rate");
  train_cmd->add_option("--head-lr-mult", train.cfg.head_lr_multiplier,
                        "slope-head lr multiplier");
  train_cmd->add_option("--enet-lambda", train.cfg.enet_lambda,
                        "elastic net lambda");
  train_cmd->add_option("--enet-alpha", train.cfg.enet_alpha,
                        "elastic net alpha (L1 mix)");
  train_cmd->add_option("--backbone", train.backbone_path,
                        "backbone config json");
  train_cmd->add_option("--preprocess", train.preprocess_path,
                        "preprocess config json");
  train_cmd->add_option("--ensemble", train.ensemble_path,
                        "ensemble config json");
  train.flags.attach(train_cmd);

  PredictOpts predict;
  auto* predict_cmd =
      app.add_subcommand("predict", "predict FVC at target weeks");
  add_common(predict_cmd, predict.common);
  predict_cmd->add_option("--data", predict.data_dir, "data directory")
      ->required()
      ->envname("FNET_DATA");
  predict_cmd->add_option("--model", predict.model_dir, "model bundle")
      ->required()
      ->envname("FNET_MODEL");
  predict_cmd->add_option("--weeks", predict.weeks,
                          "absolute target weeks (comma separated)")
      ->delimiter(',');
  predict_cmd->add_flag("--at-visits", predict.at_visits,
                        "predict at each recorded non-baseline visit and "
                        "write truth.csv");

  ScoreOpts score;
  auto* score_cmd =
      app.add_subcommand("score", "score predictions with the Laplace metric");
  score_cmd->add_option("--pred", score.pred_path, "predictions csv")
      ->required();
  score_cmd->add_option("--truth", score.truth_path, "truth csv")->required();
  score_cmd->add_option("--out", score.out_dir, "report directory (optional)");

  ExplainOpts explain;
  auto* explain_cmd = app.add_subcommand(
      "explain", "occlusion attribution overlays for one patient slice");
  add_common(explain_cmd, explain.common);
  explain_cmd->add_option("--data", explain.data_dir, "data directory")
      ->required()
      ->envname("FNET_DATA");
  explain_cmd->add_option("--model", explain.model_dir, "model bundle")
      ->required()
      ->envname("FNET_MODEL");
  explain_cmd->add_option("--patient", explain.patient_id, "patient id")
      ->required();
  explain_cmd->add_option("--slice", explain.slice_index,
                          "selected-slice index (0 = most inferior)");
  explain_cmd->add_option("--patch", explain.occlusion.patch, "patch size px");
  explain_cmd->add_option("--stride", explain.occlusion.stride,
                          "patch stride px");
  explain_cmd->add_option("--baseline", explain.occlusion.baseline_value,
                          "occlusion fill value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (synth_cmd->parsed()) return run_synth(synth);
    if (ingest_cmd->parsed()) return run_ingest(ingest);
    if (preprocess_cmd->parsed()) return run_preprocess(preprocess);
    if (train_cmd->parsed()) return run_train(train);
    if (predict_cmd->parsed()) return run_predict(predict);
    if (score_cmd->parsed()) return run_score(score);
    if (explain_cmd->parsed()) return run_explain(explain);
  } catch (const ValidationError& e) {
    std::cerr << "fnet: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "fnet: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
