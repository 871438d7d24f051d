#include "fnet/cohort_synth.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace fs = std::filesystem;

namespace fnet {

void validate(const SynthConfig& cfg) {
  if (cfg.n_patients < 1) throw std::invalid_argument("synth: n_patients >= 1");
  if (cfg.slices_per_volume < 1 || cfg.height < 1 || cfg.width < 1) {
    throw std::invalid_argument("synth: bad volume dims");
  }
  if (cfg.visit_weeks.empty()) {
    throw std::invalid_argument("synth: need at least one visit week");
  }
  for (std::size_t i = 1; i < cfg.visit_weeks.size(); ++i) {
    if (cfg.visit_weeks[i] <= cfg.visit_weeks[i - 1]) {
      throw std::invalid_argument("synth: visit weeks must be increasing");
    }
  }
  const double psum =
      cfg.smoking_probs[0] + cfg.smoking_probs[1] + cfg.smoking_probs[2];
  if (std::abs(psum - 1.0) > 1e-6 || cfg.p_male < 0 || cfg.p_male > 1) {
    throw std::invalid_argument("synth: probabilities must be normalized");
  }
}

namespace {

// splitmix64 finalizer; patient i draws from an independent stream.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t i) {
  std::uint64_t z = seed + (i + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct Ellipse {
  double cr, cc, ar, ac;
  // Squared normalized radius; <= 1 means inside.
  double rho2(int r, int c) const {
    const double dr = (r - cr) / ar;
    const double dc = (c - cc) / ac;
    return dr * dr + dc * dc;
  }
};

Ellipse body_ellipse(int rows, int cols) {
  return {rows / 2.0, cols / 2.0, 0.46 * rows, 0.46 * cols};
}

std::pair<Ellipse, Ellipse> lung_ellipses(int rows, int cols) {
  const Ellipse left{rows / 2.0, 0.32 * cols, 0.32 * rows, 0.16 * cols};
  const Ellipse right{rows / 2.0, 0.68 * cols, 0.32 * rows, 0.16 * cols};
  return {left, right};
}

constexpr double kTypicalFvcMale = 4000.0;
constexpr double kTypicalFvcFemale = 3200.0;

double typical_fvc(Sex sex, int age) {
  const double base = sex == Sex::Male ? kTypicalFvcMale : kTypicalFvcFemale;
  return base - 20.0 * (age - 60);
}

// HU levels of the phantom.
constexpr double kAirHu = -1000.0;
constexpr double kTissueHu = 40.0;
constexpr double kLungHu = -850.0;
constexpr double kHoneycombWallHu = -100.0;
constexpr double kHoneycombCystHu = -750.0;
constexpr double kPaddingHu = -3000.0;

std::int16_t hu_to_pixel(double hu) {
  // slope 1, intercept -1024
  return static_cast<std::int16_t>(std::lround(hu + 1024.0));
}

}  // namespace

std::vector<bool> lung_mask(int rows, int cols) {
  const auto [left, right] = lung_ellipses(rows, cols);
  std::vector<bool> mask(static_cast<std::size_t>(rows) * cols, false);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (left.rho2(r, c) <= 1.0 || right.rho2(r, c) <= 1.0) {
        mask[static_cast<std::size_t>(r) * cols + c] = true;
      }
    }
  }
  return mask;
}

double fibrosis_extent(double slope_ml_per_week) {
  return std::clamp(std::abs(slope_ml_per_week) / 20.0, 0.0, 0.95);
}

std::vector<SynthPatient> sample_cohort(const SynthConfig& cfg) {
  validate(cfg);
  std::vector<SynthPatient> cohort;
  cohort.reserve(static_cast<std::size_t>(cfg.n_patients));

  const int rows = cfg.height, cols = cfg.width;
  const auto body = body_ellipse(rows, cols);
  const auto [left, right] = lung_ellipses(rows, cols);
  const int lower_cutoff = lower_slice_count(cfg.slices_per_volume, 0.55);

  for (int i = 0; i < cfg.n_patients; ++i) {
    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    std::normal_distribution<double> age_dist(cfg.age_mean, cfg.age_std);
    std::bernoulli_distribution male_dist(cfg.p_male);
    std::discrete_distribution<int> smoking_dist(
        {cfg.smoking_probs[0], cfg.smoking_probs[1], cfg.smoking_probs[2]});
    std::normal_distribution<double> slope_dist(cfg.slope_mean, cfg.slope_std);
    std::normal_distribution<double> base_dist(cfg.base_fvc_mean,
                                               cfg.base_fvc_std);
    std::normal_distribution<double> noise_dist(0.0, 1.0);

    SynthPatient p;
    auto& rec = p.entry.record;
    std::ostringstream id;
    id << "SYN" << std::setw(4) << std::setfill('0') << i;
    rec.patient_id = id.str();

    rec.age = static_cast<int>(std::lround(age_dist(rng)));
    rec.sex = male_dist(rng) ? Sex::Male : Sex::Female;
    const int smoke = smoking_dist(rng);
    rec.smoking = smoke == 0 ? Smoking::CurrentlySmokes
                             : (smoke == 1 ? Smoking::ExSmoker
                                           : Smoking::NeverSmoked);
    p.true_slope = slope_dist(rng);
    const double base = std::max(base_dist(rng), 800.0);
    const double typical = typical_fvc(rec.sex, rec.age);
    for (int week : cfg.visit_weeks) {
      const double noise = cfg.fvc_noise_std * noise_dist(rng);
      FvcVisit v;
      v.week = week;
      v.fvc_ml = std::max(base + p.true_slope * week + noise, 200.0);
      v.percent = 100.0 * v.fvc_ml / typical;
      rec.visits.push_back(v);
    }

    // CT volume: body/lung phantom; honeycomb in the outer lung annulus of
    // the lower slices. extent is the areal fraction of the lung zone, and
    // the area outside normalized radius rho in an ellipse is 1 - rho^2, so
    // the threshold is linear in extent.
    const double extent = fibrosis_extent(p.true_slope);
    const double rho2_threshold = 1.0 - extent;
    auto& vol = p.entry.volume;
    vol.patient_id = rec.patient_id;
    for (int s = 0; s < cfg.slices_per_volume; ++s) {
      CtSlice slice;
      slice.rows = rows;
      slice.cols = cols;
      slice.rescale_slope = 1.0;
      slice.rescale_intercept = -1024.0;
      slice.z_position = 10.0 * s;
      // Matches the export layout so export -> load round-trips exactly.
      std::ostringstream sid;
      sid << rec.patient_id << "/slice_" << std::setw(3) << std::setfill('0')
          << s << ".dcm";
      slice.source_id = sid.str();
      slice.pixels.resize(static_cast<std::size_t>(rows) * cols);
      const bool fibrotic_slice = s < lower_cutoff;
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          double hu = kAirHu;
          if (body.rho2(r, c) <= 1.0) {
            hu = kTissueHu;
            const double rho2 = std::min(left.rho2(r, c), right.rho2(r, c));
            if (rho2 <= 1.0) {
              hu = kLungHu;
              if (fibrotic_slice && extent > 0 && rho2 > rho2_threshold) {
                hu = ((r / 2 + c / 2) % 2 == 0) ? kHoneycombWallHu
                                                : kHoneycombCystHu;
              }
            }
          }
          slice.pixels[static_cast<std::size_t>(r) * cols + c] =
              hu_to_pixel(hu);
        }
      }
      if (cfg.plant_padding && s == 0) {
        const int k = std::max(rows / 8, 1);
        for (int r = 0; r < k; ++r) {
          for (int c = 0; c < k; ++c) {
            slice.pixels[static_cast<std::size_t>(r) * cols + c] =
                hu_to_pixel(kPaddingHu);
          }
        }
      }
      vol.slices.push_back(std::move(slice));
    }
    cohort.push_back(std::move(p));
  }
  return cohort;
}

std::vector<CohortEntry> to_entries(const std::vector<SynthPatient>& cohort) {
  std::vector<CohortEntry> entries;
  entries.reserve(cohort.size());
  for (const auto& p : cohort) entries.push_back(p.entry);
  return entries;
}

namespace {

// Shortest round-trip decimal form.
std::string format_value(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace

void export_cohort(const std::vector<CohortEntry>& cohort,
                   const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream csv(fs::path(dir) / "metadata.csv", std::ios::binary);
  if (!csv) throw std::runtime_error("export_cohort: cannot write metadata.csv");
  csv << kMetadataCsvHeader << "\n";
  for (const auto& e : cohort) {
    for (const auto& v : e.record.visits) {
      csv << e.record.patient_id << "," << v.week << ","
          << format_value(v.fvc_ml) << "," << format_value(v.percent) << ","
          << e.record.age << "," << to_string(e.record.sex) << ","
          << to_string(e.record.smoking) << "\n";
    }
  }
  csv.close();
  if (!csv) throw std::runtime_error("export_cohort: metadata write failed");

  for (const auto& e : cohort) {
    const fs::path pdir = fs::path(dir) / e.record.patient_id;
    fs::create_directories(pdir);
    for (std::size_t s = 0; s < e.volume.slices.size(); ++s) {
      const auto bytes = write_dicom_slice(e.volume.slices[s]);
      std::ostringstream name;
      name << "slice_" << std::setw(3) << std::setfill('0') << s << ".dcm";
      std::ofstream f(pdir / name.str(), std::ios::binary);
      if (!f) {
        throw std::runtime_error("export_cohort: cannot write " + name.str());
      }
      f.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
      if (!f) {
        throw std::runtime_error("export_cohort: write failed " + name.str());
      }
    }
  }
}

std::vector<PatientRecord> load_metadata(const std::string& csv_path) {
  std::ifstream f(csv_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + csv_path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_metadata_csv(ss.str());
}

std::vector<CohortEntry> load_cohort(const std::string& dir) {
  const auto records = load_metadata((fs::path(dir) / "metadata.csv").string());
  std::vector<CohortEntry> cohort;
  cohort.reserve(records.size());
  for (const auto& rec : records) {
    const fs::path pdir = fs::path(dir) / rec.patient_id;
    if (!fs::is_directory(pdir)) {
      throw std::runtime_error("load_cohort: missing slice directory for " +
                               rec.patient_id);
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(pdir)) {
      if (entry.path().extension() == ".dcm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<CtSlice> slices;
    slices.reserve(files.size());
    for (const auto& file : files) {
      std::ifstream sf(file, std::ios::binary);
      std::vector<std::uint8_t> bytes(
          (std::istreambuf_iterator<char>(sf)), std::istreambuf_iterator<char>());
      slices.push_back(parse_dicom_slice(
          bytes, (fs::path(rec.patient_id) / file.filename()).string()));
    }
    CohortEntry e;
    e.record = rec;
    e.volume = assemble_volume(rec.patient_id, std::move(slices));
    cohort.push_back(std::move(e));
  }
  return cohort;
}

}  // namespace fnet
