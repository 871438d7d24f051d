#include "fnet/backbone.hpp"

#include <stdexcept>

namespace fnet {

BackboneConfig BackboneConfig::desk_default() {
  BackboneConfig cfg;
  cfg.input_height = 256;
  cfg.input_width = 256;
  cfg.stem = StemConfig{8, 3, 2, 1};
  cfg.stages = {
      PrpeBlockConfig{8, 4, 8, 1, 2},
      PrpeBlockConfig{8, 4, 16, 2, 2},
      PrpeBlockConfig{16, 8, 16, 1, 2},
      PrpeBlockConfig{16, 8, 32, 2, 2},
  };
  cfg.hub_taps = {HubTap{0, 2}, HubTap{1, 3}};
  cfg.feature_dim = 32;
  return cfg;
}

void validate(const BackboneConfig& cfg) {
  if (cfg.input_height < 1 || cfg.input_width < 1) {
    throw std::invalid_argument("backbone: input dims must be >= 1");
  }
  if (cfg.stem.out_channels < 1 || cfg.stem.kernel < 1 ||
      cfg.stem.stride < 1 || cfg.stem.pad < 0) {
    throw std::invalid_argument("backbone: bad stem config");
  }
  int channels = cfg.stem.out_channels;
  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    const auto& blk = cfg.stages[i];
    if (blk.stride != 1 && blk.stride != 2) {
      throw std::invalid_argument("backbone: block stride must be 1 or 2");
    }
    if (blk.mid_channels < 1 || blk.branches < 1) {
      throw std::invalid_argument("backbone: bad block config");
    }
    if (blk.in_channels != channels) {
      throw std::invalid_argument("backbone: stage " + std::to_string(i) +
                                  " input channels do not chain");
    }
    if (blk.stride == 1 && blk.out_channels != blk.in_channels) {
      throw std::invalid_argument(
          "backbone: unstrided block needs out_channels == in_channels");
    }
    channels = blk.out_channels;
  }
  if (channels != cfg.feature_dim) {
    throw std::invalid_argument(
        "backbone: final stage channels must equal feature_dim");
  }
  for (const auto& tap : cfg.hub_taps) {
    if (tap.source < 0 || tap.target < 0 ||
        static_cast<std::size_t>(tap.target) >= cfg.stages.size() ||
        tap.source >= tap.target) {
      throw std::invalid_argument("backbone: hub taps must satisfy source < target");
    }
  }
}

}  // namespace fnet
