#include "fnet/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace fnet {

void validate(const OcclusionConfig& cfg) {
  if (cfg.stride < 1 || cfg.stride > cfg.patch) {
    throw ExplainError("occlusion: need 1 <= stride <= patch");
  }
}

namespace {

// Grid origins along one axis: multiples of stride, with the last position
// pulled back so the patch ends exactly at the border. Guarantees full
// coverage for any dims (stride <= patch).
std::vector<int> grid_positions(int extent, int patch, int stride) {
  std::vector<int> pos;
  if (extent <= patch) {
    pos.push_back(0);
    return pos;
  }
  for (int p = 0; p + patch < extent; p += stride) pos.push_back(p);
  pos.push_back(extent - patch);
  return pos;
}

}  // namespace

AttributionMap occlusion_attribution(
    const std::function<double(const NormalizedSlice&)>& slope_fn,
    const NormalizedSlice& slice, const OcclusionConfig& cfg) {
  validate(cfg);
  const int rows = slice.rows();
  const int cols = slice.cols();
  const double original = slope_fn(slice);

  AttributionMap map;
  map.values = SliceArray::Zero(rows, cols);
  SliceArray coverage = SliceArray::Zero(rows, cols);

  NormalizedSlice occluded;
  const auto row_pos = grid_positions(rows, cfg.patch, cfg.stride);
  const auto col_pos = grid_positions(cols, cfg.patch, cfg.stride);
  for (int r0 : row_pos) {
    const int rh = std::min(cfg.patch, rows - r0);
    for (int c0 : col_pos) {
      const int cw = std::min(cfg.patch, cols - c0);
      occluded.values = slice.values;
      occluded.values.block(r0, c0, rh, cw).setConstant(cfg.baseline_value);
      const double effect = std::abs(slope_fn(occluded) - original);
      map.values.block(r0, c0, rh, cw) += static_cast<float>(effect);
      coverage.block(r0, c0, rh, cw) += 1.f;
    }
  }
  map.values /= coverage;
  return map;
}

AttributionMap occlusion_attribution(const FibrosisModel& model,
                                     const NormalizedSlice& slice,
                                     const ClinicalFeatures& clinical,
                                     const OcclusionConfig& cfg) {
  auto slope_fn = [&](const NormalizedSlice& s) {
    return slice_slopes(model, {s}, clinical).front();
  };
  return occlusion_attribution(slope_fn, slice, cfg);
}

std::string render_overlay_pgm(const NormalizedSlice& slice,
                               const AttributionMap& map) {
  const int rows = slice.rows();
  const int cols = slice.cols();
  if (map.rows() != rows || map.cols() != cols) {
    throw ExplainError("render_overlay: map dims must match slice");
  }
  const float peak = map.values.maxCoeff();
  std::string out = "P5\n" + std::to_string(cols) + " " +
                    std::to_string(rows) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const float v = std::clamp(slice.values(r, c), 0.f, 1.f);
      const float w = peak > 0 ? map.values(r, c) / peak : 0.f;
      // Brighten toward white where the attribution is strong.
      const float lum = v + (1.f - v) * w;
      out.push_back(static_cast<char>(
          static_cast<unsigned char>(std::lround(lum * 255.f))));
    }
  }
  return out;
}

void render_overlay(const NormalizedSlice& slice, const AttributionMap& map,
                    const std::string& path) {
  const std::string bytes = render_overlay_pgm(slice, map);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ExplainError("render_overlay: cannot open " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ExplainError("render_overlay: write failed for " + path);
}

}  // namespace fnet
