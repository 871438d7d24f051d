#ifndef FNET_COHORT_SYNTH_HPP
#define FNET_COHORT_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fnet/predictor.hpp"
#include "fnet/preprocess.hpp"

namespace fnet {

// Synthetic cohort: demographics matched to the published cohort summary,
// FVC series with a planted linear decline, and CT volumes whose lower-lung
// honeycomb texture extent grows with the decline rate, so the imaging
// signal is actually learnable.
struct SynthConfig {
  std::uint64_t seed = 0;
  int n_patients = 8;
  double age_mean = 67.14;
  double age_std = 7.01;
  double p_male = 0.7855;
  double smoking_probs[3] = {0.054, 0.663, 0.283};  // (Current, Ex, Never)
  double slope_mean = -8.0;  // ml/week
  double slope_std = 6.0;
  double base_fvc_mean = 2700.0;  // ml
  double base_fvc_std = 600.0;
  std::vector<int> visit_weeks = {0, 6, 12, 24, 36, 48};
  double fvc_noise_std = 60.0;  // ml
  int slices_per_volume = 10;
  int height = 64;
  int width = 64;
  bool plant_padding = false;  // corner sentinels on the first slice
};

void validate(const SynthConfig& cfg);

struct SynthPatient {
  CohortEntry entry;
  double true_slope = 0.0;  // ml/week, before noise
};

// Deterministic given the seed; patients use split sub-seeds so the sample
// is independent of generation order.
std::vector<SynthPatient> sample_cohort(const SynthConfig& cfg);

std::vector<CohortEntry> to_entries(const std::vector<SynthPatient>& cohort);

// Interior lung mask used as the fibrosis target zone (texture is planted
// inside it on the lower slices).
std::vector<bool> lung_mask(int rows, int cols);

// Fraction of the lung zone textured for a given decline rate; monotone
// non-decreasing in |slope|.
double fibrosis_extent(double slope_ml_per_week);

// Writes <dir>/metadata.csv plus <dir>/<patient>/slice_###.dcm files; the
// round trip through load_cohort reproduces the records and volumes exactly.
void export_cohort(const std::vector<CohortEntry>& cohort,
                   const std::string& dir);

// Loads a directory in export_cohort layout.
std::vector<CohortEntry> load_cohort(const std::string& dir);

// Metadata CSV only (prediction targets without imaging).
std::vector<PatientRecord> load_metadata(const std::string& csv_path);

}  // namespace fnet

#endif  // FNET_COHORT_SYNTH_HPP
