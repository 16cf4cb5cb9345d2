#pragma once

#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ronet/layers.hpp"
#include "ronet/rodec.hpp"

namespace ronet {

struct BranchWidths {
  std::size_t wide = 256;
  std::size_t narrow = 64;
};

struct RorecConfig {
  std::size_t depth_ros = 3;
  std::size_t depth_res = 6;
  std::size_t depth_fus = 3;
  BranchWidths ros{192, 48};
  BranchWidths res{256, 64};
  BranchWidths fus{256, 64};
  std::size_t scale = 4;  // 1 removes the pixel-shuffle stages
  bool use_bn = true;
  double residual_scale = 1.0;
  std::size_t upsample_width = 256;
  std::size_t aux_upsample_width = 64;
  std::size_t image_channels = 3;
  std::size_t levels = 3;  // rank-one components feeding RecROs
  bool deep_supervision = true;  // build the two auxiliary upsamplers

  void validate() const;
};

struct ResBlockParams {
  ConvParams expand;  // narrow -> wide
  ConvParams reduce;  // wide -> narrow
  Tensor bn_gamma;    // [wide], present iff use_bn
  Tensor bn_beta;
  ops::BatchNormStats<float> bn_stats;
};

// entry conv -> residual blocks -> exit conv; shared by RecROs, RecRes and
// RecFus.
struct BranchParams {
  ConvParams entry;
  std::vector<ResBlockParams> blocks;
  ConvParams exit;
};

// Pixel-shuffle stages (conv to `width` channels, then x2 depth-to-space)
// followed by the 9x9 output conv.
struct UpsamplerParams {
  std::vector<ConvParams> stages;
  ConvParams last;

  std::size_t scale() const { return std::size_t{1} << stages.size(); }
};

struct RorecWeights {
  RorecConfig config;
  BranchParams ros;
  BranchParams res;
  BranchParams fus;
  UpsamplerParams fus_up;
  std::optional<UpsamplerParams> ros_up;
  std::optional<UpsamplerParams> res_up;

  static RorecWeights init(const RorecConfig& config, Initializer init,
                           std::mt19937_64& rng);
  static RorecWeights load(const ModelWeights& w);
  ModelWeights named() const;
};

// Task presets: sr-noisefree, sr-realistic, denoise-gray, denoise-color.
struct TaskPreset {
  std::string name;
  RorecConfig rorec;
  std::size_t levels;
  double lambda;
  double eta;
  int alpha;
};
TaskPreset task_preset(std::string_view name);
// Divides every feature width by `divisor` (>= 1).
RorecConfig scaled_widths(RorecConfig config, std::size_t divisor);

Tensor branch_forward(const Tensor& input, const BranchParams& branch,
                      double residual_scale, bool use_bn, ops::BnMode mode);
Tensor upsample_forward(const Tensor& input, const UpsamplerParams& up);

struct RonetTrace {
  RodecOutput decomposition;
  Tensor ros_features;
  Tensor res_features;
  Tensor restored;
};

// Source -> RODec -> (RecROs on concatenated components, RecRes on the
// residual) -> RecFus on the concatenated branch outputs -> upsampling.
RonetTrace ronet_forward_trace(const Tensor& source, const RodecWeights& dec,
                               const RorecWeights& rec, ops::BnMode mode);
Tensor ronet_forward(const Tensor& source, const RodecWeights& dec,
                     const RorecWeights& rec, ops::BnMode mode = ops::BnMode::kEval);

struct RecLossConfig {
  double lambda = 0.0;
  double eta = 0.0;
  int alpha = 2;
};

struct RecLossTerms {
  Tensor total;
  Tensor ros;  // undefined when lambda == 0
  Tensor res;  // undefined when lambda == 0
  Tensor fus;  // includes eta * surrogate
};

// Mean absolute difference of horizontal and vertical first differences.
Tensor gradient_surrogate(const Tensor& prediction, const Tensor& target);

// lambda * (L_ROs + L_Res) + (1 - lambda) * L_Fus. The target decomposition
// uses `dec` without recording.
RecLossTerms loss_rec(const Tensor& source, const Tensor& target,
                      const RodecWeights& dec, const RorecWeights& rec,
                      const RecLossConfig& config,
                      ops::BnMode mode = ops::BnMode::kTrain);

}  // namespace ronet
