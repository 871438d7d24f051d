#ifndef FNET_BACKBONE_HPP
#define FNET_BACKBONE_HPP

#include <random>
#include <string>
#include <vector>

#include "fnet/autodiff.hpp"
#include "fnet/optimize.hpp"

namespace fnet {

// Projection-replication-projection-expansion block. The input is pointwise
// projected to mid_channels, replicated through `branches` parallel 3x3
// depthwise convolutions (strided in the -S variant), the concatenation is
// pointwise projected back to mid_channels and expanded to out_channels,
// then added to the residual path. ReLU follows the first projection, each
// depthwise branch, and the second projection; the expansion is linear so a
// zero-initialized expansion leaves the block an exact identity.
struct PrpeBlockConfig {
  int in_channels = 8;
  int mid_channels = 4;
  int out_channels = 8;
  int stride = 1;  // 1 (PRPE) or 2 (PRPE-S)
  int branches = 2;
};

struct StemConfig {
  int out_channels = 8;
  int kernel = 3;
  int stride = 2;
  int pad = 1;
};

// Long-range connectivity hub: output of stage `source` is average-pooled to
// the spatial size of stage `target`'s output, pointwise projected, added.
struct HubTap {
  int source = 0;
  int target = 0;
};

struct BackboneConfig {
  int input_height = 256;
  int input_width = 256;
  StemConfig stem;
  std::vector<PrpeBlockConfig> stages;
  std::vector<HubTap> hub_taps;
  int feature_dim = 32;

  static BackboneConfig desk_default();
};

void validate(const BackboneConfig& cfg);

inline std::string hub_param_prefix(const HubTap& tap) {
  return "hub" + std::to_string(tap.source) + "_" + std::to_string(tap.target);
}

// --- parameter construction -------------------------------------------------

template <typename Scalar>
void init_prpe_params(ParamStore<Scalar>& params, const std::string& prefix,
                      const PrpeBlockConfig& blk, std::mt19937_64& rng) {
  const int in = blk.in_channels, mid = blk.mid_channels,
            out = blk.out_channels;
  params.create(prefix + ".p1.w",
                kaiming_uniform<Scalar>({mid, in, 1, 1}, in, rng));
  params.create(prefix + ".p1.b", Tensor<Scalar>({mid}));
  for (int b = 0; b < blk.branches; ++b) {
    const std::string dw = prefix + ".dw" + std::to_string(b);
    params.create(dw + ".w", kaiming_uniform<Scalar>({mid, 3, 3}, 9, rng));
    params.create(dw + ".b", Tensor<Scalar>({mid}));
  }
  params.create(prefix + ".p2.w", kaiming_uniform<Scalar>(
                                      {mid, mid * blk.branches, 1, 1},
                                      mid * blk.branches, rng));
  params.create(prefix + ".p2.b", Tensor<Scalar>({mid}));
  params.create(prefix + ".e.w",
                kaiming_uniform<Scalar>({out, mid, 1, 1}, mid, rng));
  params.create(prefix + ".e.b", Tensor<Scalar>({out}));
  if (blk.stride != 1) {
    params.create(prefix + ".res.w",
                  kaiming_uniform<Scalar>({out, in, 1, 1}, in, rng));
    params.create(prefix + ".res.b", Tensor<Scalar>({out}));
  }
}

template <typename Scalar>
void init_backbone_params(ParamStore<Scalar>& params, const BackboneConfig& cfg,
                          std::mt19937_64& rng) {
  validate(cfg);
  const auto& st = cfg.stem;
  params.create("stem.w",
                kaiming_uniform<Scalar>({st.out_channels, 1, st.kernel, st.kernel},
                                        st.kernel * st.kernel, rng));
  params.create("stem.b", Tensor<Scalar>({st.out_channels}));
  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    init_prpe_params(params, "stage" + std::to_string(i), cfg.stages[i], rng);
  }
  for (const auto& tap : cfg.hub_taps) {
    const int src_ch = cfg.stages[static_cast<std::size_t>(tap.source)].out_channels;
    const int dst_ch = cfg.stages[static_cast<std::size_t>(tap.target)].out_channels;
    const std::string prefix = hub_param_prefix(tap);
    params.create(prefix + ".w",
                  kaiming_uniform<Scalar>({dst_ch, src_ch, 1, 1}, src_ch, rng));
    params.create(prefix + ".b", Tensor<Scalar>({dst_ch}));
  }
}

// --- forward ----------------------------------------------------------------

template <typename Scalar>
Var<Scalar> prpe_forward(const Var<Scalar>& x, const PrpeBlockConfig& blk,
                         const ParamStore<Scalar>& params,
                         const std::string& prefix) {
  if (x.value().dim(1) != blk.in_channels) {
    throw TensorError(TensorErrc::ShapeMismatch,
                      prefix + ": input channel mismatch");
  }
  auto p1 = relu(bias_add(pointwise_conv(x, params.at(prefix + ".p1.w")),
                          params.at(prefix + ".p1.b")));
  std::vector<Var<Scalar>> branches;
  branches.reserve(static_cast<std::size_t>(blk.branches));
  for (int b = 0; b < blk.branches; ++b) {
    const std::string dw = prefix + ".dw" + std::to_string(b);
    branches.push_back(relu(bias_add(
        depthwise_conv2d(p1, params.at(dw + ".w"), blk.stride, 1),
        params.at(dw + ".b"))));
  }
  auto merged = concat(branches, 1);
  auto p2 = relu(bias_add(pointwise_conv(merged, params.at(prefix + ".p2.w")),
                          params.at(prefix + ".p2.b")));
  auto expanded = bias_add(pointwise_conv(p2, params.at(prefix + ".e.w")),
                           params.at(prefix + ".e.b"));
  if (blk.stride == 1) {
    return residual_add(x, expanded);
  }
  auto shortcut =
      bias_add(pointwise_conv(x, params.at(prefix + ".res.w"), blk.stride),
               params.at(prefix + ".res.b"));
  return residual_add(shortcut, expanded);
}

// late + PW(avg-pool(early)); the spatial ratio must be a power of two.
template <typename Scalar>
Var<Scalar> hub_inject(const Var<Scalar>& early, const Var<Scalar>& late,
                       const ParamStore<Scalar>& params,
                       const std::string& prefix) {
  const auto& ev = early.value();
  const auto& lv = late.value();
  const int eh = ev.dim(2), ew = ev.dim(3);
  const int lh = lv.dim(2), lw = lv.dim(3);
  if (lh < 1 || lw < 1 || eh % lh != 0 || ew % lw != 0 ||
      eh / lh != ew / lw) {
    throw TensorError(TensorErrc::ShapeMismatch,
                      prefix + ": early/late spatial dims incompatible");
  }
  const int ratio = eh / lh;
  if ((ratio & (ratio - 1)) != 0) {
    throw TensorError(TensorErrc::ShapeMismatch,
                      prefix + ": spatial ratio must be a power of two");
  }
  Var<Scalar> pooled = ratio > 1 ? avg_pool2d(early, ratio) : early;
  auto projected = bias_add(pointwise_conv(pooled, params.at(prefix + ".w")),
                            params.at(prefix + ".b"));
  return residual_add(late, projected);
}

// Stem conv, PRPE stages with hub injections, global average pool.
template <typename Scalar>
Var<Scalar> backbone_forward(const Var<Scalar>& x, const BackboneConfig& cfg,
                             const ParamStore<Scalar>& params) {
  const auto& xv = x.value();
  if (xv.rank() != 4 || xv.dim(1) != 1) {
    throw TensorError(TensorErrc::ShapeMismatch,
                      "backbone_forward: input must be Nx1xHxW");
  }
  if (xv.dim(2) != cfg.input_height || xv.dim(3) != cfg.input_width) {
    throw TensorError(TensorErrc::ShapeMismatch,
                      "backbone_forward: input dims do not match config");
  }
  auto h = relu(bias_add(
      conv2d(x, params.at("stem.w"), cfg.stem.stride, cfg.stem.pad),
      params.at("stem.b")));

  std::vector<Var<Scalar>> stage_out;
  stage_out.reserve(cfg.stages.size());
  for (std::size_t t = 0; t < cfg.stages.size(); ++t) {
    h = prpe_forward(h, cfg.stages[t], params, "stage" + std::to_string(t));
    for (const auto& tap : cfg.hub_taps) {
      if (static_cast<std::size_t>(tap.target) == t) {
        h = hub_inject(stage_out[static_cast<std::size_t>(tap.source)], h,
                       params, hub_param_prefix(tap));
      }
    }
    stage_out.push_back(h);
  }
  return global_avg_pool(h);
}

}  // namespace fnet

#endif  // FNET_BACKBONE_HPP
