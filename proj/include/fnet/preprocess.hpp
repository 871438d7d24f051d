#ifndef FNET_PREPROCESS_HPP
#define FNET_PREPROCESS_HPP

#include <Eigen/Core>

#include <stdexcept>
#include <vector>

#include "fnet/dicom.hpp"
#include "fnet/ingest.hpp"

namespace fnet {

class PreprocessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using SliceArray =
    Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Pixel values in Hounsfield units.
struct HuSlice {
  SliceArray values;  // rows x cols
  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
};

// Windowed intensities in [0, 1].
struct NormalizedSlice {
  SliceArray values;
  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
};

struct PreprocessConfig {
  double window_level = -650.0;  // HU
  double window_width = 1700.0;  // HU, > 0
  double lower_fraction = 0.55;  // (0, 1]
  int target_height = 256;
  int target_width = 256;
  double padding_sentinel_threshold = -2000.0;  // HU
  double air_hu = -1000.0;                      // HU
  double calibration_tolerance = 50.0;          // HU
};

void validate(const PreprocessConfig& cfg);

// value[i] = pixels[i] * rescale_slope + rescale_intercept
HuSlice to_hounsfield(const CtSlice& slice);

// Clamp to [level - width/2, level + width/2] and map linearly onto [0, 1].
NormalizedSlice apply_window(const HuSlice& slice, double level, double width);

// Replaces padding sentinels (<= threshold) with air, and when the sentinel
// set matches the outside of the largest inscribed circle (Jaccard >= 0.9),
// flattens everything outside that circle to air. Idempotent.
HuSlice mask_artifacts(const HuSlice& slice, const PreprocessConfig& cfg);

// Estimates the air reference as the median HU over the outer 2-pixel frame
// of every slice; shifts the whole volume when it is off by more than the
// configured tolerance. Idempotent.
std::vector<HuSlice> correct_calibration(std::vector<HuSlice> slices,
                                         const PreprocessConfig& cfg);

// ceil(fraction * n), computed so that exact products like 0.55*100 do not
// round up through floating-point representation error.
int lower_slice_count(int n, double fraction);

// First ceil(fraction*n) elements of an ascending-z slice list: the inferior
// portion of the scan. Throws PreprocessError on an empty input.
template <typename T>
std::vector<T> select_lower_slices(const std::vector<T>& slices,
                                   double fraction) {
  if (slices.empty()) {
    throw PreprocessError("select_lower_slices: empty volume");
  }
  const int k = lower_slice_count(static_cast<int>(slices.size()), fraction);
  return std::vector<T>(slices.begin(), slices.begin() + k);
}

// Bilinear resize with pixel-center alignment; values stay in [0, 1].
NormalizedSlice resize_slice(const NormalizedSlice& slice, int target_height,
                             int target_width);

// HU conversion, artifact masking and calibration over the whole volume,
// then lower-fraction selection, windowing and resize of the kept slices.
std::vector<NormalizedSlice> preprocess_volume(const CtVolume& volume,
                                               const PreprocessConfig& cfg);

}  // namespace fnet

#endif  // FNET_PREPROCESS_HPP
