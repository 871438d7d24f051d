#include "fnet/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace fnet {

void validate(const PreprocessConfig& cfg) {
  if (cfg.window_width <= 0) {
    throw PreprocessError("window_width must be > 0");
  }
  if (cfg.lower_fraction <= 0 || cfg.lower_fraction > 1) {
    throw PreprocessError("lower_fraction must be in (0, 1]");
  }
  if (cfg.target_height < 1 || cfg.target_width < 1) {
    throw PreprocessError("target size must be >= 1");
  }
}

HuSlice to_hounsfield(const CtSlice& slice) {
  validate(slice);
  HuSlice out;
  out.values.resize(slice.rows, slice.cols);
  const float slope = static_cast<float>(slice.rescale_slope);
  const float intercept = static_cast<float>(slice.rescale_intercept);
  for (int r = 0; r < slice.rows; ++r) {
    for (int c = 0; c < slice.cols; ++c) {
      out.values(r, c) =
          static_cast<float>(slice.pixels[static_cast<std::size_t>(r) *
                                              static_cast<std::size_t>(slice.cols) +
                                          static_cast<std::size_t>(c)]) *
              slope +
          intercept;
    }
  }
  return out;
}

NormalizedSlice apply_window(const HuSlice& slice, double level, double width) {
  if (width <= 0) throw PreprocessError("apply_window: width must be > 0");
  const float lo = static_cast<float>(level - width / 2.0);
  const float hi = static_cast<float>(level + width / 2.0);
  NormalizedSlice out;
  out.values = (slice.values.min(hi).max(lo) - lo) / (hi - lo);
  return out;
}

namespace {

// Largest inscribed circle of the pixel grid, centered on the grid center.
struct InscribedCircle {
  double cr, cc, r2;
  bool outside(int r, int c) const {
    const double dr = r - cr;
    const double dc = c - cc;
    return dr * dr + dc * dc > r2;
  }
};

InscribedCircle inscribed_circle(int rows, int cols) {
  const double radius = std::min(rows, cols) / 2.0;
  return InscribedCircle{(rows - 1) / 2.0, (cols - 1) / 2.0, radius * radius};
}

}  // namespace

HuSlice mask_artifacts(const HuSlice& slice, const PreprocessConfig& cfg) {
  const int rows = slice.rows();
  const int cols = slice.cols();
  const float thr = static_cast<float>(cfg.padding_sentinel_threshold);
  const float air = static_cast<float>(cfg.air_hu);

  const auto circle = inscribed_circle(rows, cols);
  std::int64_t n_sentinel = 0, n_outside = 0, n_both = 0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const bool s = slice.values(r, c) <= thr;
      const bool o = circle.outside(r, c);
      n_sentinel += s;
      n_outside += o;
      n_both += s && o;
    }
  }

  HuSlice out;
  out.values = slice.values;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (out.values(r, c) <= thr) out.values(r, c) = air;
    }
  }

  // Circular artifact: sentinel set ~ complement of the inscribed circle.
  const std::int64_t n_union = n_sentinel + n_outside - n_both;
  if (n_union > 0 && n_sentinel > 0 &&
      static_cast<double>(n_both) / static_cast<double>(n_union) >= 0.9) {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        if (circle.outside(r, c)) out.values(r, c) = air;
      }
    }
  }
  return out;
}

namespace {

double median_of(std::vector<float>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid),
                   v.end());
  double m = v[mid];
  if (n % 2 == 0) {
    const auto lower =
        *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    m = (m + lower) / 2.0;
  }
  return m;
}

}  // namespace

std::vector<HuSlice> correct_calibration(std::vector<HuSlice> slices,
                                         const PreprocessConfig& cfg) {
  if (slices.empty()) {
    throw PreprocessError("correct_calibration: empty volume");
  }
  std::vector<float> border;
  for (const auto& s : slices) {
    const int rows = s.rows();
    const int cols = s.cols();
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const bool frame = r < 2 || c < 2 || r >= rows - 2 || c >= cols - 2;
        if (frame) border.push_back(s.values(r, c));
      }
    }
  }
  const double median = median_of(border);
  const double shift = median - cfg.air_hu;
  if (std::abs(shift) > cfg.calibration_tolerance) {
    for (auto& s : slices) s.values -= static_cast<float>(shift);
  }
  return slices;
}

int lower_slice_count(int n, double fraction) {
  if (n < 1) throw PreprocessError("lower_slice_count: empty volume");
  if (fraction <= 0 || fraction > 1) {
    throw PreprocessError("lower_slice_count: fraction must be in (0, 1]");
  }
  // The 1e-9 slack absorbs representation error in fraction*n (0.55*100 is
  // 55.000000000000007 in doubles) without disturbing genuine ceilings.
  int k = static_cast<int>(std::ceil(fraction * n - 1e-9));
  return std::clamp(k, 1, n);
}

NormalizedSlice resize_slice(const NormalizedSlice& slice, int target_height,
                             int target_width) {
  const int sh = slice.rows();
  const int sw = slice.cols();
  if (sh < 1 || sw < 1 || target_height < 1 || target_width < 1) {
    throw PreprocessError("resize_slice: dims must be >= 1");
  }
  NormalizedSlice out;
  out.values.resize(target_height, target_width);
  const double sy = static_cast<double>(sh) / target_height;
  const double sx = static_cast<double>(sw) / target_width;
  for (int i = 0; i < target_height; ++i) {
    double fy = (i + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(sh - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, sh - 1);
    const double wy = fy - y0;
    for (int j = 0; j < target_width; ++j) {
      double fx = (j + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(sw - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, sw - 1);
      const double wx = fx - x0;
      const double v =
          (1 - wy) * ((1 - wx) * slice.values(y0, x0) + wx * slice.values(y0, x1)) +
          wy * ((1 - wx) * slice.values(y1, x0) + wx * slice.values(y1, x1));
      out.values(i, j) = static_cast<float>(v);
    }
  }
  return out;
}

std::vector<NormalizedSlice> preprocess_volume(const CtVolume& volume,
                                               const PreprocessConfig& cfg) {
  validate(cfg);
  if (volume.slices.empty()) {
    throw PreprocessError("preprocess_volume: empty volume");
  }
  std::vector<HuSlice> hu;
  hu.reserve(volume.slices.size());
  for (const auto& s : volume.slices) {
    hu.push_back(mask_artifacts(to_hounsfield(s), cfg));
  }
  hu = correct_calibration(std::move(hu), cfg);
  hu = select_lower_slices(hu, cfg.lower_fraction);

  std::vector<NormalizedSlice> out;
  out.reserve(hu.size());
  for (const auto& s : hu) {
    out.push_back(resize_slice(apply_window(s, cfg.window_level, cfg.window_width),
                               cfg.target_height, cfg.target_width));
  }
  return out;
}

}  // namespace fnet
