#include "ronet/rorec.hpp"

#include <array>

namespace ronet {
namespace {

constexpr std::size_t kConvKernel = 3;
constexpr std::size_t kOutputKernel = 9;

BranchParams init_branch(std::size_t in, BranchWidths widths, std::size_t depth,
                         bool use_bn, Initializer init, std::mt19937_64& rng) {
  BranchParams b;
  b.entry = ConvParams::init(widths.narrow, in, kConvKernel, kConvKernel, init, rng);
  for (std::size_t i = 0; i < depth; ++i) {
    ResBlockParams blk;
    blk.expand = ConvParams::init(widths.wide, widths.narrow, kConvKernel, kConvKernel, init, rng);
    blk.reduce = ConvParams::init(widths.narrow, widths.wide, kConvKernel, kConvKernel, init, rng);
    if (use_bn) {
      blk.bn_gamma = Tensor(Shape{widths.wide}, 1.0f);
      blk.bn_gamma.set_requires_grad(true);
      blk.bn_beta = Tensor(Shape{widths.wide}, 0.0f);
      blk.bn_beta.set_requires_grad(true);
      blk.bn_stats = ops::BatchNormStats<float>::initial(widths.wide);
    }
    b.blocks.push_back(std::move(blk));
  }
  b.exit = ConvParams::init(widths.narrow, widths.narrow, kConvKernel, kConvKernel, init, rng);
  return b;
}

UpsamplerParams init_upsampler(std::size_t in, std::size_t width, std::size_t scale,
                               std::size_t out_channels, Initializer init,
                               std::mt19937_64& rng) {
  UpsamplerParams up;
  for (std::size_t s = scale; s > 1; s /= 2) {
    up.stages.push_back(ConvParams::init(width, in, kConvKernel, kConvKernel, init, rng));
    in = width / 4;
  }
  up.last = ConvParams::init(out_channels, in, kOutputKernel, kOutputKernel, init, rng);
  return up;
}

void export_branch(const BranchParams& b, ModelWeights& w, const std::string& prefix) {
  b.entry.export_to(w, prefix + "entry.");
  for (std::size_t i = 0; i < b.blocks.size(); ++i) {
    const std::string p = prefix + "block" + std::to_string(i) + ".";
    const auto& blk = b.blocks[i];
    blk.expand.export_to(w, p + "expand.");
    if (blk.bn_gamma.defined()) {
      w.add(p + "bn.gamma", blk.bn_gamma);
      w.add(p + "bn.beta", blk.bn_beta);
      w.add(p + "bn.running_mean", blk.bn_stats.running_mean);
      w.add(p + "bn.running_var", blk.bn_stats.running_var);
    }
    blk.reduce.export_to(w, p + "reduce.");
  }
  b.exit.export_to(w, prefix + "exit.");
}

BranchParams load_branch(const ModelWeights& w, const std::string& prefix) {
  BranchParams b;
  b.entry = ConvParams::load(w, prefix + "entry.");
  const std::size_t depth = count_indexed(w, prefix + "block");
  for (std::size_t i = 0; i < depth; ++i) {
    const std::string p = prefix + "block" + std::to_string(i) + ".";
    ResBlockParams blk;
    blk.expand = ConvParams::load(w, p + "expand.");
    blk.reduce = ConvParams::load(w, p + "reduce.");
    if (w.contains(p + "bn.gamma")) {
      blk.bn_gamma = w.get(p + "bn.gamma");
      blk.bn_beta = w.get(p + "bn.beta");
      blk.bn_stats = {w.get(p + "bn.running_mean"), w.get(p + "bn.running_var")};
    }
    b.blocks.push_back(std::move(blk));
  }
  b.exit = ConvParams::load(w, prefix + "exit.");
  return b;
}

void export_upsampler(const UpsamplerParams& up, ModelWeights& w, const std::string& prefix) {
  for (std::size_t i = 0; i < up.stages.size(); ++i) {
    up.stages[i].export_to(w, prefix + "stage" + std::to_string(i) + ".");
  }
  up.last.export_to(w, prefix + "last.");
}

UpsamplerParams load_upsampler(const ModelWeights& w, const std::string& prefix) {
  UpsamplerParams up;
  const std::size_t stages = count_indexed(w, prefix + "stage");
  for (std::size_t i = 0; i < stages; ++i) {
    up.stages.push_back(ConvParams::load(w, prefix + "stage" + std::to_string(i) + "."));
  }
  up.last = ConvParams::load(w, prefix + "last.");
  return up;
}

bool has_prefix(const ModelWeights& w, const std::string& prefix) {
  for (const auto& e : w) {
    if (e.first.starts_with(prefix)) return true;
  }
  return false;
}

}  // namespace

void RorecConfig::validate() const {
  if (scale != 1 && scale != 2 && scale != 4) {
    throw ConfigError("rorec: scale must be 1, 2 or 4, got " + std::to_string(scale));
  }
  if (depth_ros < 1 || depth_res < 1 || depth_fus < 1) {
    throw ConfigError("rorec: every branch needs at least one residual block");
  }
  if (image_channels != 1 && image_channels != 3) {
    throw ConfigError("rorec: image_channels must be 1 or 3");
  }
  if (levels < 1 || levels > kMaxLevels) throw ConfigError("rorec: levels must be in [1, 6]");
  if (scale > 1 && (upsample_width % 4 != 0 || upsample_width == 0)) {
    throw ConfigError("rorec: upsample_width must be a positive multiple of 4");
  }
  if (scale > 1 && deep_supervision &&
      (aux_upsample_width % 4 != 0 || aux_upsample_width == 0)) {
    throw ConfigError("rorec: aux_upsample_width must be a positive multiple of 4");
  }
  for (const auto& bw : {ros, res, fus}) {
    if (bw.wide == 0 || bw.narrow == 0) throw ConfigError("rorec: zero branch width");
  }
}

RorecWeights RorecWeights::init(const RorecConfig& config, Initializer init,
                                std::mt19937_64& rng) {
  config.validate();
  RorecWeights w;
  w.config = config;
  const std::size_t c = config.image_channels;
  w.ros = init_branch(config.levels * c, config.ros, config.depth_ros, config.use_bn, init, rng);
  w.res = init_branch(c, config.res, config.depth_res, config.use_bn, init, rng);
  w.fus = init_branch(config.ros.narrow + config.res.narrow, config.fus,
                      config.depth_fus, config.use_bn, init, rng);
  w.fus_up = init_upsampler(config.fus.narrow, config.upsample_width, config.scale, c, init, rng);
  if (config.deep_supervision) {
    w.ros_up = init_upsampler(config.ros.narrow, config.aux_upsample_width,
                              config.scale, c, init, rng);
    w.res_up = init_upsampler(config.res.narrow, config.aux_upsample_width,
                              config.scale, c, init, rng);
  }
  return w;
}

ModelWeights RorecWeights::named() const {
  ModelWeights w;
  export_branch(ros, w, "rorec.ros.");
  export_branch(res, w, "rorec.res.");
  export_branch(fus, w, "rorec.fus.");
  export_upsampler(fus_up, w, "rorec.fus_up.");
  if (ros_up) export_upsampler(*ros_up, w, "rorec.ros_up.");
  if (res_up) export_upsampler(*res_up, w, "rorec.res_up.");
  w.add("rorec.meta.residual_scale",
        Tensor(Shape{1}, static_cast<float>(config.residual_scale)));
  return w;
}

RorecWeights RorecWeights::load(const ModelWeights& named) {
  if (!has_prefix(named, "rorec.")) throw ConfigError("weights hold no rorec tensors");
  RorecWeights w;
  w.ros = load_branch(named, "rorec.ros.");
  w.res = load_branch(named, "rorec.res.");
  w.fus = load_branch(named, "rorec.fus.");
  w.fus_up = load_upsampler(named, "rorec.fus_up.");
  if (has_prefix(named, "rorec.ros_up.")) w.ros_up = load_upsampler(named, "rorec.ros_up.");
  if (has_prefix(named, "rorec.res_up.")) w.res_up = load_upsampler(named, "rorec.res_up.");

  RorecConfig& c = w.config;
  c.depth_ros = w.ros.blocks.size();
  c.depth_res = w.res.blocks.size();
  c.depth_fus = w.fus.blocks.size();
  auto widths = [](const BranchParams& b) {
    if (b.blocks.empty()) throw ConfigError("rorec: branch without residual blocks");
    return BranchWidths{b.blocks.front().expand.out_channels(), b.entry.out_channels()};
  };
  c.ros = widths(w.ros);
  c.res = widths(w.res);
  c.fus = widths(w.fus);
  c.scale = w.fus_up.scale();
  c.use_bn = w.ros.blocks.front().bn_gamma.defined();
  c.image_channels = w.fus_up.last.out_channels();
  c.levels = w.ros.entry.in_channels() / c.image_channels;
  if (!w.fus_up.stages.empty()) c.upsample_width = w.fus_up.stages.front().out_channels();
  c.deep_supervision = w.ros_up.has_value() && w.res_up.has_value();
  if (c.deep_supervision && !w.ros_up->stages.empty()) {
    c.aux_upsample_width = w.ros_up->stages.front().out_channels();
  }
  if (named.contains("rorec.meta.residual_scale")) {
    c.residual_scale = named.get("rorec.meta.residual_scale").data()[0];
  }
  if (w.ros.entry.in_channels() != c.levels * c.image_channels) {
    throw ConfigError("rorec: RecROs entry expects " +
                      std::to_string(w.ros.entry.in_channels()) +
                      " channels, not a multiple of the image channels");
  }
  c.validate();
  return w;
}

TaskPreset task_preset(std::string_view name) {
  TaskPreset p;
  p.name = std::string(name);
  RorecConfig& c = p.rorec;
  if (name == "sr-noisefree" || name == "sr-realistic") {
    c.ros = {192, 48};
    c.res = {256, 64};
    c.fus = {256, 64};
    c.scale = 4;
    c.image_channels = 3;
    p.levels = 3;
    p.lambda = 0.5;
    p.eta = 1e-3;
    p.alpha = 1;
  } else if (name == "denoise-gray" || name == "denoise-color") {
    c.ros = {96, 48};
    c.res = {128, 64};
    c.fus = {128, 64};
    c.scale = 1;
    c.image_channels = name == "denoise-gray" ? 1 : 3;
    p.levels = 1;
    p.lambda = 0.0;
    p.eta = 0.0;
    p.alpha = 2;
  } else {
    throw ConfigError("unknown task preset '" + std::string(name) +
                      "' (expected sr-noisefree, sr-realistic, denoise-gray or denoise-color)");
  }
  c.levels = p.levels;
  c.deep_supervision = p.lambda > 0.0;
  return p;
}

RorecConfig scaled_widths(RorecConfig config, std::size_t divisor) {
  if (divisor < 1) throw ConfigError("width divisor must be >= 1");
  auto shrink = [divisor](std::size_t v) { return std::max<std::size_t>(1, v / divisor); };
  for (BranchWidths* bw : {&config.ros, &config.res, &config.fus}) {
    bw->wide = shrink(bw->wide);
    bw->narrow = shrink(bw->narrow);
  }
  auto shrink4 = [divisor](std::size_t v) {
    return std::max<std::size_t>(4, (v / divisor) / 4 * 4);
  };
  config.upsample_width = shrink4(config.upsample_width);
  config.aux_upsample_width = shrink4(config.aux_upsample_width);
  return config;
}

Tensor branch_forward(const Tensor& input, const BranchParams& branch,
                      double residual_scale, bool use_bn, ops::BnMode mode) {
  if (input.shape().rank() != 4 || input.dim(1) != branch.entry.in_channels()) {
    throw ShapeError("branch_forward: input " + input.shape().str() +
                     " does not match entry conv with " +
                     std::to_string(branch.entry.in_channels()) + " channels");
  }
  Tensor h = branch.entry(input);
  const float rs = static_cast<float>(residual_scale);
  for (const auto& blk : branch.blocks) {
    Tensor r = blk.expand(h);
    if (use_bn) {
      if (!blk.bn_gamma.defined()) {
        throw ConfigError("branch_forward: batch norm requested but block has no BN parameters");
      }
      // Copies of the stats handles share storage with the weights.
      auto stats = blk.bn_stats;
      r = ops::batch_norm(r, blk.bn_gamma, blk.bn_beta, stats, mode);
    }
    r = blk.reduce(ops::relu(r));
    h = ops::add(h, rs == 1.0f ? r : ops::scale(r, rs));
  }
  return branch.exit(h);
}

Tensor upsample_forward(const Tensor& input, const UpsamplerParams& up) {
  Tensor h = input;
  for (const auto& stage : up.stages) h = ops::pixel_shuffle(stage(h), 2);
  return up.last(h);
}

RonetTrace ronet_forward_trace(const Tensor& source, const RodecWeights& dec,
                               const RorecWeights& rec, ops::BnMode mode) {
  const RorecConfig& c = rec.config;
  if (dec.config.levels != c.levels) {
    throw ConfigError("ronet: decomposition has " + std::to_string(dec.config.levels) +
                      " levels but RecROs expects " + std::to_string(c.levels));
  }
  if (dec.config.rop.out_channels != c.image_channels) {
    throw ConfigError("ronet: decomposition and reconstruction disagree on image channels");
  }
  RonetTrace t;
  t.decomposition = rodec_forward(source, dec);
  const Tensor components = ops::concat_channels<float>(t.decomposition.components);
  t.ros_features = branch_forward(components, rec.ros, c.residual_scale, c.use_bn, mode);
  t.res_features = branch_forward(t.decomposition.residual(), rec.res, c.residual_scale,
                                  c.use_bn, mode);
  const std::array<Tensor, 2> both{t.ros_features, t.res_features};
  const Tensor fused = branch_forward(ops::concat_channels<float>(both), rec.fus,
                                      c.residual_scale, c.use_bn, mode);
  t.restored = upsample_forward(fused, rec.fus_up);
  return t;
}

Tensor ronet_forward(const Tensor& source, const RodecWeights& dec,
                     const RorecWeights& rec, ops::BnMode mode) {
  return ronet_forward_trace(source, dec, rec, mode).restored;
}

Tensor gradient_surrogate(const Tensor& prediction, const Tensor& target) {
  const Tensor dx = ops::loss_norm(ops::first_difference(prediction, 3),
                                   ops::first_difference(target, 3), 1);
  const Tensor dy = ops::loss_norm(ops::first_difference(prediction, 2),
                                   ops::first_difference(target, 2), 1);
  return ops::add(dx, dy);
}

RecLossTerms loss_rec(const Tensor& source, const Tensor& target,
                      const RodecWeights& dec, const RorecWeights& rec,
                      const RecLossConfig& config, ops::BnMode mode) {
  if (config.lambda < 0.0 || config.lambda > 1.0) {
    throw ArgumentError("loss_rec: lambda must lie in [0, 1]");
  }
  if (config.eta < 0.0) throw ArgumentError("loss_rec: eta must be >= 0");
  if (config.lambda > 0.0 && (!rec.ros_up || !rec.res_up)) {
    throw ConfigError("loss_rec: lambda > 0 needs the auxiliary upsamplers");
  }
  const RonetTrace trace = ronet_forward_trace(source, dec, rec, mode);
  if (trace.restored.shape() != target.shape()) {
    throw ShapeError("loss_rec: restored " + trace.restored.shape().str() +
                     " vs target " + target.shape().str());
  }

  RecLossTerms terms;
  terms.fus = ops::loss_norm(trace.restored, target, config.alpha);
  if (config.eta > 0.0) {
    terms.fus = ops::add(terms.fus, ops::scale(gradient_surrogate(trace.restored, target),
                                               static_cast<float>(config.eta)));
  }
  if (config.lambda == 0.0) {
    terms.total = ops::scale(terms.fus, 1.0f);
    return terms;
  }

  RodecOutput target_parts;
  {
    NoGradScope no_grad;
    target_parts = rodec_forward(target, dec);
  }
  terms.ros = ops::loss_norm(upsample_forward(trace.ros_features, *rec.ros_up),
                             target_parts.low_rank(), config.alpha);
  terms.res = ops::loss_norm(upsample_forward(trace.res_features, *rec.res_up),
                             target_parts.residual(), config.alpha);
  const float lambda = static_cast<float>(config.lambda);
  terms.total = ops::add(ops::scale(ops::add(terms.ros, terms.res), lambda),
                         ops::scale(terms.fus, 1.0f - lambda));
  return terms;
}

}  // namespace ronet
