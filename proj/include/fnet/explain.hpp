#ifndef FNET_EXPLAIN_HPP
#define FNET_EXPLAIN_HPP

#include <functional>
#include <stdexcept>
#include <string>

#include "fnet/predictor.hpp"
#include "fnet/preprocess.hpp"

namespace fnet {

class ExplainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-negative per-pixel importances for one slice.
struct AttributionMap {
  SliceArray values;
  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
};

struct OcclusionConfig {
  int patch = 16;             // px
  int stride = 8;             // px, 1 <= stride <= patch
  float baseline_value = 0.f; // air after windowing
};

void validate(const OcclusionConfig& cfg);

// Slides a baseline-filled patch over the slice on a stride grid, records
// |slope(occluded) - slope(original)| into every covered pixel, and divides
// by per-pixel coverage counts. Model-agnostic: any slope function works.
AttributionMap occlusion_attribution(
    const std::function<double(const NormalizedSlice&)>& slope_fn,
    const NormalizedSlice& slice, const OcclusionConfig& cfg);

// Convenience wrapper over the trained model's slope head (median is not
// involved: attribution is per slice).
AttributionMap occlusion_attribution(const FibrosisModel& model,
                                     const NormalizedSlice& slice,
                                     const ClinicalFeatures& clinical,
                                     const OcclusionConfig& cfg);

// 8-bit grayscale PGM (P5) with the attribution brightening the base image
// toward white. Deterministic bytes for identical inputs.
void render_overlay(const NormalizedSlice& slice, const AttributionMap& map,
                    const std::string& path);

// The same overlay as raw PGM bytes (used by tests and the writer above).
std::string render_overlay_pgm(const NormalizedSlice& slice,
                               const AttributionMap& map);

}  // namespace fnet

#endif  // FNET_EXPLAIN_HPP
