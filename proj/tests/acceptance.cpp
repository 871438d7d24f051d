// Acceptance suite: runs the project's exit criteria end to end and prints
// one PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <vector>

#include <sys/wait.h>

#include "fnet/cohort_synth.hpp"
#include "fnet/config_json.hpp"
#include "fnet/dicom.hpp"
#include "fnet/elastic_net.hpp"
#include "fnet/explain.hpp"
#include "fnet/model_io.hpp"
#include "fnet/predictor.hpp"
#include "fnet/preprocess.hpp"
#include "fnet/quantile.hpp"
#include "fnet/scoring.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace fnet;

namespace {

struct Harness {
  int failures = 0;
  int index = 0;

  void run(const std::string& name, const std::function<void()>& body) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    std::string error;
    try {
      body();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - start)
                        .count();
    if (error.empty()) {
      std::cout << "PASS  criterion " << index << "  " << name << "  (" << ms
                << " ms)\n";
    } else {
      ++failures;
      std::cout << "FAIL  criterion " << index << "  " << name << "  (" << ms
                << " ms): " << error << "\n";
    }
  }
};

void require(bool cond, const std::string& what) {
  if (!cond) throw std::runtime_error(what);
}

template <typename T>
void require_near(T got, T want, T tol, const std::string& what) {
  if (!(std::abs(got - want) <= tol)) {
    std::ostringstream os;
    os << what << ": got " << got << ", want " << want << " +/- " << tol;
    throw std::runtime_error(os.str());
  }
}

// --- criterion 1: metric exactness -----------------------------------------

long double reference_metric(long double t, long double p, long double s) {
  const long double sc = s > 70.0L ? s : 70.0L;
  long double d = t - p;
  if (d < 0) d = -d;
  if (d > 1000.0L) d = 1000.0L;
  return -sqrtl(2.0L) * d / sc - logl(sqrtl(2.0L) * sc);
}

void criterion_metric_exactness() {
  struct Case {
    double t, p, s, stated;
  };
  const Case cases[] = {
      {2800, 2800, 70, -4.59507},
      {3000, 2800, 100, -7.78017},
      {4000, 2500, 50, -24.79812},
  };
  for (const auto& c : cases) {
    const double ref = static_cast<double>(reference_metric(c.t, c.p, c.s));
    // The stated three-decimal-ish values must themselves agree with the
    // independent evaluation before we assert against them.
    require_near(ref, c.stated, 1e-4, "reference vs stated");
    const double got = laplace_log_likelihood({c.t, c.p, c.s});
    require_near(got, c.stated, 1e-4, "implementation vs stated");
    require_near(got, ref, 1e-9, "implementation vs reference");
  }
}

// --- criterion 2: sigma-optimality scan (Table 2 is reference-only) --------

void criterion_sigma_optimality() {
  // The published comparison constants are carried as static reference rows
  // only; the private test cohort makes them non-reproducible here.
  const auto& rows = reference_scores();
  require(rows.size() == 4, "expected 4 reference rows");
  bool has_fibrosis_net = false;
  for (const auto& r : rows) {
    if (std::string(r.method) == "Fibrosis-Net") {
      has_fibrosis_net = r.score == -6.8188;
    }
  }
  require(has_fibrosis_net, "Fibrosis-Net reference row missing");

  for (double delta : {0.0, 10.0, 100.0, 500.0, 1000.0}) {
    const double step = 0.5;
    double best_sigma = 70.0;
    double best = -std::numeric_limits<double>::infinity();
    for (double s = 70.0; s <= 2500.0; s += step) {
      const double L = laplace_log_likelihood({3000.0, 3000.0 - delta, s});
      if (L > best) {
        best = L;
        best_sigma = s;
      }
    }
    require_near(best_sigma, optimal_sigma(delta), step + 1e-9,
                 "argmax sigma scan at delta=" + std::to_string(delta));
  }
}

// --- criterion 3: gradient fidelity -----------------------------------------

Var<double> fd_scalarize(const Var<double>& v) {
  return mae_loss(v, Var<double>::constant(
                         Tensor64::full(v.value().shape(), -100.0)));
}

template <typename BuildOp>
void fd_check(std::mt19937_64& rng, std::vector<Var<double>> params,
              BuildOp op, const std::string& what) {
  auto proj = oracle::random_tensor<double>(op().value().shape(), rng, 0.2, 1.0);
  auto build = [&] {
    return fd_scalarize(mul(op(), Var<double>::constant(proj)));
  };
  const double err = oracle::max_rel_grad_error(std::move(params), build, 1e-5);
  if (err >= 1e-5) {
    throw std::runtime_error(what + ": max relative error " +
                             std::to_string(err));
  }
}

void criterion_gradient_fidelity() {
  std::mt19937_64 rng(4242);
  for (int it = 0; it < 20; ++it) {
    {
      const int K = 1 + it % 3, stride = 1 + it % 2;
      auto x = Var<double>::parameter(
          oracle::random_tensor<double>({1, 1 + it % 2, K + 3, K + 2}, rng));
      auto w = Var<double>::parameter(oracle::random_tensor<double>(
          {1 + (it / 2) % 2, 1 + it % 2, K, K}, rng));
      fd_check(rng, {x, w}, [&] { return conv2d(x, w, stride, it % 2); },
               "conv2d case " + std::to_string(it));
    }
    {
      const int C = 1 + it % 3;
      auto x = Var<double>::parameter(
          oracle::random_tensor<double>({1, C, 5, 5}, rng));
      auto w = Var<double>::parameter(
          oracle::random_tensor<double>({C, 3, 3}, rng));
      fd_check(rng, {x, w},
               [&] { return depthwise_conv2d(x, w, 1 + it % 2, 1); },
               "depthwise case " + std::to_string(it));
    }
    {
      const int C = 1 + it % 3, O = 1 + (it / 2) % 3;
      auto x = Var<double>::parameter(
          oracle::random_tensor<double>({1, C, 4, 4}, rng));
      auto w = Var<double>::parameter(
          oracle::random_tensor<double>({O, C, 1, 1}, rng));
      fd_check(rng, {x, w}, [&] { return pointwise_conv(x, w, 1 + it % 2); },
               "pointwise case " + std::to_string(it));
    }
    {
      auto x = Var<double>::parameter(
          oracle::random_tensor<double>({2, 3}, rng));
      auto w = Var<double>::parameter(
          oracle::random_tensor<double>({3, 2}, rng));
      auto b = Var<double>::parameter(oracle::random_tensor<double>({2}, rng));
      fd_check(rng, {x, w, b}, [&] { return dense(x, w, b); },
               "dense case " + std::to_string(it));
    }
    {
      auto x = Var<double>::parameter(
          oracle::random_tensor<double>({1, 2, 4, 4}, rng));
      auto b = Var<double>::parameter(oracle::random_tensor<double>({2}, rng));
      fd_check(rng, {x, b}, [&] { return bias_add(x, b); },
               "bias_add case " + std::to_string(it));
      fd_check(rng, {x}, [&] { return global_avg_pool(x); },
               "gap case " + std::to_string(it));
      fd_check(rng, {x}, [&] { return avg_pool2d(x, 2); },
               "avg_pool case " + std::to_string(it));
    }
    {
      auto x = Var<double>::parameter(
          oracle::random_tensor_away_from_zero<double>({2, 2, 3, 3}, rng, 0.05));
      fd_check(rng, {x}, [&] { return relu(x); },
               "relu case " + std::to_string(it));
    }
    {
      auto a = Var<double>::parameter(oracle::random_tensor<double>({2, 3}, rng));
      auto b = Var<double>::parameter(oracle::random_tensor<double>({2, 3}, rng));
      fd_check(rng, {a, b}, [&] { return concat<double>({a, b}, it % 2); },
               "concat case " + std::to_string(it));
      fd_check(rng, {a, b}, [&] { return residual_add(a, b); },
               "residual case " + std::to_string(it));
      fd_check(rng, {a, b}, [&] { return mul(a, b); },
               "mul case " + std::to_string(it));
    }
    {
      auto pred = Var<double>::parameter(
          oracle::random_tensor<double>({3, 2}, rng, 2.0, 4.0));
      auto target = Var<double>::constant(
          oracle::random_tensor<double>({3, 2}, rng, -1.0, 1.0));
      auto build = [&] { return mae_loss(pred, target); };
      const double err = oracle::max_rel_grad_error({pred}, build, 1e-5);
      require(err < 1e-5, "mae case " + std::to_string(it));
    }
  }
}

// --- criterion 4: convolution oracles ---------------------------------------

void criterion_conv_oracles() {
  std::mt19937_64 rng(515);
  for (int it = 0; it < 30; ++it) {
    const int K = 1 + it % 3, stride = 1 + it % 2, pad = it % 2;
    const int N = 1 + it % 2, C = 1 + it % 3, O = 1 + (it / 3) % 3;
    auto x = oracle::random_tensor<double>({N, C, K + 3 + it % 3, K + 2}, rng);
    auto w = oracle::random_tensor<double>({O, C, K, K}, rng);
    const auto got =
        conv2d(Var<double>::constant(x), Var<double>::constant(w), stride, pad)
            .value();
    const auto want = oracle::conv2d(x, w, stride, pad);
    require(oracle::max_abs_diff(got, want) < 1e-5,
            "conv2d oracle case " + std::to_string(it));

    auto dw = oracle::random_tensor<double>({C, 3, 3}, rng);
    auto x5 = oracle::random_tensor<double>({N, C, 6, 6}, rng);
    const auto got_dw = depthwise_conv2d(Var<double>::constant(x5),
                                         Var<double>::constant(dw), stride, 1)
                            .value();
    require(oracle::max_abs_diff(got_dw, oracle::depthwise(x5, dw, stride, 1)) <
                1e-5,
            "depthwise oracle case " + std::to_string(it));

    auto pw = oracle::random_tensor<double>({O, C, 1, 1}, rng);
    const auto got_pw = pointwise_conv(Var<double>::constant(x5),
                                       Var<double>::constant(pw), stride)
                            .value();
    require(oracle::max_abs_diff(got_pw, oracle::pointwise(x5, pw, stride)) <
                1e-5,
            "pointwise oracle case " + std::to_string(it));
  }
}

// --- criterion 5: elastic net ------------------------------------------------

Eigen::MatrixXd standardized(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd Z = X.rowwise() - X.colwise().mean();
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double sd = std::sqrt(Z.col(j).squaredNorm() / X.rows());
    if (sd > 0) Z.col(j) /= sd;
  }
  return Z;
}

void criterion_elastic_net() {
  std::mt19937_64 rng(616);
  std::normal_distribution<double> dist(0.0, 1.0);
  const int n = 40, p = 5;
  Eigen::MatrixXd X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = dist(rng);
  Eigen::VectorXd beta(p);
  beta << 3, -1.5, 0, 2.25, 0.5;
  Eigen::VectorXd y = X * beta;
  for (int i = 0; i < n; ++i) y[i] += 0.1 * dist(rng);

  const Eigen::MatrixXd Z = standardized(X);
  const Eigen::VectorXd yc = y.array() - y.mean();

  // lambda = 0: OLS to 1e-6.
  const auto ols = fit_elastic_net(X, y, 0.0, 0.5, 1e-12);
  const Eigen::VectorXd beta_ols =
      (Z.transpose() * Z).ldlt().solve(Z.transpose() * yc);
  for (int j = 0; j < p; ++j) {
    require_near(ols.coefficients[j], beta_ols[j], 1e-6, "OLS coefficient");
  }

  // alpha = 0: ridge closed form to 1e-5.
  const double lambda = 0.7;
  const auto ridge = fit_elastic_net(X, y, lambda, 0.0, 1e-12);
  const Eigen::VectorXd beta_ridge =
      (Z.transpose() * Z + n * lambda * Eigen::MatrixXd::Identity(p, p))
          .ldlt()
          .solve(Z.transpose() * yc);
  for (int j = 0; j < p; ++j) {
    require_near(ridge.coefficients[j], beta_ridge[j], 1e-5,
                 "ridge coefficient");
  }

  // 1-D soft-threshold closed form to 1e-8.
  Eigen::MatrixXd X1 = X.col(0);
  Eigen::VectorXd y1 = 1.8 * X1.col(0);
  const auto m1 = fit_elastic_net(X1, y1, 0.5, 0.5, 1e-14);
  const Eigen::MatrixXd Z1 = standardized(X1);
  const double rho = Z1.col(0).dot(Eigen::VectorXd(y1.array() - y1.mean())) / n;
  require_near(m1.coefficients[0], soft_threshold(rho, 0.25) / (1.0 + 0.25),
               1e-8, "1-D soft threshold");

  // Objective non-increasing every sweep.
  std::vector<double> trace;
  fit_elastic_net(X, y, 0.3, 0.5, 1e-10, 10000, &trace);
  require(trace.size() > 1, "objective trace too short");
  for (std::size_t s = 1; s < trace.size(); ++s) {
    require(trace[s] <= trace[s - 1] + 1e-12, "objective increased on sweep " +
                                                  std::to_string(s));
  }
}

// --- criterion 6: quantile regressor ----------------------------------------

void criterion_quantile() {
  {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(5, 1);
    Eigen::VectorXd y(5);
    y << 1, 2, 3, 4, 5;
    const auto m = fit_quantile(X, y, {0.5});
    double best = 0, best_loss = std::numeric_limits<double>::infinity();
    for (double v = 0; v <= 6.0; v += 0.01) {
      double loss = 0;
      for (int i = 0; i < 5; ++i) loss += pinball_loss(v, y[i], 0.5);
      if (loss < best_loss - 1e-12) {
        best_loss = loss;
        best = v;
      }
    }
    require_near(m.intercepts[0], best, 0.1, "median intercept vs grid scan");
  }
  {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(10, 1);
    Eigen::VectorXd y(10);
    for (int i = 0; i < 10; ++i) y[i] = i + 1;
    const auto m = fit_quantile(X, y, {0.8});
    double best_loss = std::numeric_limits<double>::infinity();
    for (double v = 0; v <= 11.0; v += 0.05) {
      double loss = 0;
      for (int i = 0; i < 10; ++i) loss += pinball_loss(v, y[i], 0.8);
      best_loss = std::min(best_loss, loss);
    }
    double dist = std::numeric_limits<double>::infinity();
    for (double v = 0; v <= 11.0; v += 0.05) {
      double loss = 0;
      for (int i = 0; i < 10; ++i) loss += pinball_loss(v, y[i], 0.8);
      if (loss <= best_loss + 1e-9) {
        dist = std::min(dist, std::abs(m.intercepts[0] - v));
      }
    }
    require(dist < 0.5, "q=0.8 intercept " + std::to_string(m.intercepts[0]) +
                            " is " + std::to_string(dist) +
                            " from the grid-optimal region");
  }
  {
    std::mt19937_64 rng(717);
    std::normal_distribution<double> dist(0.0, 2.0);
    Eigen::MatrixXd X(30, 3);
    Eigen::VectorXd y(30);
    for (int i = 0; i < 30; ++i) {
      for (int j = 0; j < 3; ++j) X(i, j) = dist(rng);
      y[i] = 3.0 * X(i, 0) - X(i, 2) + dist(rng);
    }
    const auto m = fit_quantile(X, y);
    for (int it = 0; it < 50; ++it) {
      Eigen::VectorXd f(3);
      for (int j = 0; j < 3; ++j) f[j] = dist(rng);
      const auto preds = predict_quantiles(m, f);
      for (std::size_t k = 1; k < preds.size(); ++k) {
        require(preds[k] >= preds[k - 1], "quantile predictions not monotone");
      }
    }
  }
}

// --- criterion 7: preprocessing contracts -----------------------------------

void criterion_preprocessing() {
  HuSlice s;
  s.values.resize(1, 3);
  s.values << -1500.f, 200.f, -650.f;
  const auto w = apply_window(s, -650.0, 1700.0);
  require_near(static_cast<double>(w.values(0, 0)), 0.0, 1e-7, "window lo");
  require_near(static_cast<double>(w.values(0, 1)), 1.0, 1e-7, "window hi");
  require_near(static_cast<double>(w.values(0, 2)), 0.5, 1e-7, "window mid");

  require(lower_slice_count(100, 0.55) == 55, "lower count 100 -> 55");
  require(lower_slice_count(20, 0.55) == 11, "lower count 20 -> 11");
  require(lower_slice_count(1, 0.55) == 1, "lower count 1 -> 1");

  PreprocessConfig cfg;
  std::mt19937_64 rng(818);
  std::uniform_real_distribution<float> dist(-3500.f, 500.f);
  for (int it = 0; it < 10; ++it) {
    HuSlice r;
    r.values.resize(16, 16);
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j) r.values(i, j) = dist(rng);
    const auto once = mask_artifacts(r, cfg);
    const auto twice = mask_artifacts(once, cfg);
    require((once.values == twice.values).all(), "mask_artifacts idempotence");
  }

  HuSlice cal;
  cal.values = SliceArray::Constant(12, 12, -300.f);
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 12; ++j) {
      if (i < 2 || j < 2 || i >= 10 || j >= 10) cal.values(i, j) = -880.f;
    }
  }
  const auto once = correct_calibration({cal}, cfg);
  const auto twice = correct_calibration(once, cfg);
  require((once[0].values == twice[0].values).all(),
          "correct_calibration idempotence");
  require_near(static_cast<double>(once[0].values(0, 0)), -1000.0, 1e-3,
               "calibration shifts border to air");
}

// --- criterion 8: end-to-end overfit ----------------------------------------

void criterion_overfit() {
  SynthConfig synth;
  synth.seed = 42;
  synth.n_patients = 8;
  synth.slices_per_volume = 10;
  synth.height = 64;
  synth.width = 64;
  synth.fvc_noise_std = 10.0;  // the 60 ml default noise floors MAE at ~68
  const auto cohort = to_entries(sample_cohort(synth));

  TrainConfig cfg;
  cfg.steps = 500;
  cfg.batch_size = 8;
  cfg.seed = 42;
  cfg.backbone = BackboneConfig::desk_default();
  cfg.backbone.input_height = cfg.backbone.input_width = 64;
  cfg.preprocess.target_height = cfg.preprocess.target_width = 64;

  TrainReport report;
  train(cohort, cfg, &report);
  std::ostringstream os;
  os << "train MAE " << report.train_mae << " ml (need < 50)";
  require(report.train_mae < 50.0, os.str());
}

// --- criterion 9: generalization sanity --------------------------------------

void criterion_generalization() {
  SynthConfig synth;
  synth.seed = 7;
  synth.n_patients = 40;
  synth.slices_per_volume = 10;
  synth.height = 64;
  synth.width = 64;
  const auto all = to_entries(sample_cohort(synth));
  const std::vector<CohortEntry> train_set(all.begin(), all.begin() + 32);
  const std::vector<CohortEntry> test_set(all.begin() + 32, all.end());

  TrainConfig cfg;
  cfg.steps = 2000;
  cfg.seed = 7;
  cfg.backbone = BackboneConfig::desk_default();
  cfg.backbone.input_height = cfg.backbone.input_width = 64;
  cfg.preprocess.target_height = cfg.preprocess.target_width = 64;
  const auto model = train(train_set, cfg);

  std::vector<ScoredPrediction> ours;
  auto naive_at = [&](double sigma) {
    std::vector<ScoredPrediction> naive;
    for (const auto& e : test_set) {
      for (std::size_t v = 1; v < e.record.visits.size(); ++v) {
        naive.push_back(
            {e.record.visits[v].fvc_ml, e.record.base_visit().fvc_ml, sigma});
      }
    }
    return score_cohort(naive);
  };
  for (const auto& e : test_set) {
    for (std::size_t v = 1; v < e.record.visits.size(); ++v) {
      const auto& visit = e.record.visits[v];
      const auto pred = predict_patient(e.volume, e.record, visit.week, model);
      ours.push_back({visit.fvc_ml, pred.fvc_ml, pred.sigma_ml});
    }
  }
  const double ours_score = score_cohort(ours);
  // Score the baseline at both the configured sigma0 and the documented
  // 200 ml default, and beat whichever is stronger.
  const double naive_score =
      std::max(naive_at(model.ensemble.sigma0), naive_at(200.0));
  std::ostringstream os;
  os << "pipeline " << ours_score << " vs naive " << naive_score
     << " (need margin >= 0.1)";
  require(ours_score - naive_score >= 0.1, os.str());
}

// --- criterion 10: round trips and determinism --------------------------------

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void criterion_round_trips() {
  // DICOM write -> parse bit-exact on randomized slices.
  std::mt19937_64 rng(919);
  std::uniform_int_distribution<int> pix(-32768, 32767);
  std::uniform_real_distribution<double> real(-2000.0, 2000.0);
  for (int it = 0; it < 25; ++it) {
    CtSlice s;
    s.rows = 1 + it % 5;
    s.cols = 1 + (it / 2) % 5;
    s.pixels.resize(static_cast<std::size_t>(s.rows) * s.cols);
    for (auto& v : s.pixels) v = static_cast<std::int16_t>(pix(rng));
    s.rescale_slope = real(rng);
    if (s.rescale_slope == 0) s.rescale_slope = 1;
    s.rescale_intercept = real(rng);
    s.z_position = real(rng);
    require(parse_dicom_slice(write_dicom_slice(s)) == s,
            "dicom round trip case " + std::to_string(it));
  }

  // Synth export -> ingest exact.
  SynthConfig synth;
  synth.seed = 1234;
  synth.n_patients = 3;
  synth.slices_per_volume = 4;
  synth.height = 16;
  synth.width = 16;
  const auto cohort = to_entries(sample_cohort(synth));
  const fs::path dir = fs::temp_directory_path() / "fnet_acceptance_synth";
  fs::remove_all(dir);
  export_cohort(cohort, dir.string());
  const auto loaded = load_cohort(dir.string());
  require(loaded.size() == cohort.size(), "cohort size after round trip");
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    require(loaded[i].record == cohort[i].record, "record round trip");
    require(loaded[i].volume == cohort[i].volume, "volume round trip");
  }
  fs::remove_all(dir);

  // Identical manifests (same seed/config/inputs through the CLI) produce
  // byte-identical prediction CSVs.
  const fs::path root = fs::temp_directory_path() / "fnet_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cli = FNET_CLI_PATH;
  auto shell = [&](const std::string& args) {
    const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
    require(std::system(cmd.c_str()) == 0, "cli failed: " + args);
  };
  const std::string data = (root / "data").string();
  shell("synth --seed 11 --patients 3 --slices 4 --height 32 --width 32 --out " +
        data);

  PreprocessConfig pp;
  pp.target_height = pp.target_width = 32;
  write_text_file((root / "pp.json").string(), to_json(pp));
  auto bb = BackboneConfig::desk_default();
  bb.input_height = bb.input_width = 32;
  write_text_file((root / "bb.json").string(), to_json(bb));

  shell("train --data " + data + " --out " + (root / "model").string() +
        " --steps 25 --seed 5 --preprocess " + (root / "pp.json").string() +
        " --backbone " + (root / "bb.json").string());
  shell("predict --data " + data + " --model " + (root / "model").string() +
        " --at-visits --out " + (root / "run1").string());
  shell("predict --data " + data + " --model " + (root / "model").string() +
        " --at-visits --out " + (root / "run2").string());

  const auto csv1 = read_file(root / "run1" / "predictions.csv");
  const auto csv2 = read_file(root / "run2" / "predictions.csv");
  require(!csv1.empty(), "empty prediction csv");
  require(csv1 == csv2, "prediction CSVs differ between identical runs");
  const auto manifest1 = read_file(root / "run1" / "manifest.json");
  const auto manifest2 = read_file(root / "run2" / "manifest.json");
  require(manifest1 == manifest2, "manifests differ between identical runs");

  // Score subcommand on the zero-error worked case prints -4.59507.
  write_text_file((root / "p.csv").string(),
                  "Patient_Week,FVC,Confidence\nP1_20,2800,70\n");
  write_text_file((root / "t.csv").string(),
                  "Patient_Week,FVC\nP1_20,2800\n");
  {
    const std::string cmd = cli + " score --pred " + (root / "p.csv").string() +
                            " --truth " + (root / "t.csv").string() + " > " +
                            (root / "score.txt").string() + " 2>&1";
    require(std::system(cmd.c_str()) == 0, "score cli failed");
    const auto out = read_file(root / "score.txt");
    const auto pos = out.rfind('\n', out.size() - 2);
    const double printed =
        std::stod(out.substr(pos == std::string::npos ? 0 : pos + 1));
    require_near(printed, -4.59507, 1e-4, "score cli worked case");
  }

  // Unknown subcommands exit with the validation code.
  {
    const std::string cmd = cli + " frobnicate > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    require(status != 0 && WIFEXITED(status) && WEXITSTATUS(status) == 1,
            "unknown subcommand should exit 1");
  }
  fs::remove_all(root);
}

// --- criterion 11: explainability property -----------------------------------

void criterion_explainability() {
  const int n = 64;
  NormalizedSlice slice;
  slice.values = SliceArray::Constant(n, n, 0.4f);
  // Planted lesion: a bright box the constructed model keys on.
  const int lr = 24, lc = 40, lh = 8, lw = 8;
  slice.values.block(lr, lc, lh, lw).setConstant(0.95f);
  auto lesion_model = [&](const NormalizedSlice& s) {
    double acc = 0;
    for (int r = lr; r < lr + lh; ++r)
      for (int c = lc; c < lc + lw; ++c) acc += s.values(r, c);
    return acc;
  };

  OcclusionConfig cfg;
  cfg.patch = 8;
  cfg.stride = 4;
  const auto map = occlusion_attribution(lesion_model, slice, cfg);

  // Brute-force enumeration of the same grid, written independently.
  SliceArray accum = SliceArray::Zero(n, n);
  SliceArray counts = SliceArray::Zero(n, n);
  const double base = lesion_model(slice);
  std::vector<int> pos;
  for (int p = 0; p + cfg.patch < n; p += cfg.stride) pos.push_back(p);
  pos.push_back(n - cfg.patch);
  double best_effect = -1;
  int best_r = -1, best_c = -1;
  for (int r0 : pos) {
    for (int c0 : pos) {
      NormalizedSlice occ;
      occ.values = slice.values;
      occ.values.block(r0, c0, cfg.patch, cfg.patch).setConstant(0.f);
      const double effect = std::abs(lesion_model(occ) - base);
      if (effect > best_effect) {
        best_effect = effect;
        best_r = r0;
        best_c = c0;
      }
      accum.block(r0, c0, cfg.patch, cfg.patch) += static_cast<float>(effect);
      counts.block(r0, c0, cfg.patch, cfg.patch) += 1.f;
    }
  }
  accum /= counts;
  require((map.values - accum).abs().maxCoeff() < 1e-5f,
          "occlusion map differs from brute-force enumeration");

  // The argmax patch must cover the lesion.
  require(best_r <= lr && lr + lh <= best_r + cfg.patch &&
              best_c <= lc && lc + lw <= best_c + cfg.patch,
          "argmax patch does not cover the lesion");

  // >= 50% of total attribution mass within the lesion box dilated by one
  // patch on every side.
  const int dr0 = std::max(lr - cfg.patch, 0), dc0 = std::max(lc - cfg.patch, 0);
  const int dr1 = std::min(lr + lh + cfg.patch, n);
  const int dc1 = std::min(lc + lw + cfg.patch, n);
  const double total = map.values.sum();
  const double inside =
      map.values.block(dr0, dc0, dr1 - dr0, dc1 - dc0).sum();
  std::ostringstream os;
  os << "attribution mass inside dilated lesion box " << inside / total
     << " (need >= 0.5)";
  require(total > 0 && inside / total >= 0.5, os.str());
}

// --- criterion 12: demographics fidelity ---------------------------------------

void criterion_demographics() {
  SynthConfig cfg;
  cfg.seed = 20260811;
  cfg.n_patients = 10000;
  cfg.slices_per_volume = 1;
  cfg.height = 8;
  cfg.width = 8;
  const auto cohort = sample_cohort(cfg);
  double age = 0;
  int males = 0;
  for (const auto& p : cohort) {
    age += p.entry.record.age;
    males += p.entry.record.sex == Sex::Male ? 1 : 0;
  }
  require_near(age / cfg.n_patients, 67.14, 0.3, "mean age");
  require_near(static_cast<double>(males) / cfg.n_patients, 0.7855, 0.02,
               "male fraction");
}

}  // namespace

int main() {
  Harness h;
  h.run("metric exactness (worked cases vs high-precision reference)",
        criterion_metric_exactness);
  h.run("sigma-optimality scan; published scores held as reference-only",
        criterion_sigma_optimality);
  h.run("gradient fidelity (central differences, 64-bit, h=1e-5)",
        criterion_gradient_fidelity);
  h.run("convolution ops match naive-loop oracles", criterion_conv_oracles);
  h.run("elastic net vs OLS/ridge/soft-threshold closed forms",
        criterion_elastic_net);
  h.run("quantile regressor vs brute-force grid optima", criterion_quantile);
  h.run("preprocessing contracts (window, lower-55%, idempotence)",
        criterion_preprocessing);
  h.run("end-to-end overfit: 500 steps reach train MAE < 50 ml",
        criterion_overfit);
  h.run("generalization: pipeline beats naive baseline by >= 0.1",
        criterion_generalization);
  h.run("round trips and CLI determinism", criterion_round_trips);
  h.run("occlusion attribution localizes a planted lesion",
        criterion_explainability);
  h.run("synthetic demographics match the published summary",
        criterion_demographics);

  if (h.failures == 0) {
    std::cout << "acceptance: all " << h.index << " criteria passed\n";
    return 0;
  }
  std::cout << "acceptance: " << h.failures << " of " << h.index
            << " criteria FAILED\n";
  return 1;
}
