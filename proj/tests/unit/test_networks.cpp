#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "ronet/rorec.hpp"

namespace ronet {
namespace {

using testing::random_rodec;
using testing::random_tensor;

RopConfig small_rop(std::size_t channels = 1) {
  RopConfig c;
  c.channels_wide = 8;
  c.channels_narrow = 4;
  c.out_channels = channels;
  return c;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
  return m;
}

Matrix slice(const Tensor& t, std::size_t n, std::size_t c) {
  Matrix m(t.dim(2), t.dim(3));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = t.at(n, c, i, j);
  return m;
}

TEST(Ropnet, EverySliceIsRankOne) {
  std::mt19937_64 rng(3);
  const RopWeights w = RopWeights::init(small_rop(3), Initializer::kXavierUniform, rng);
  const Tensor y = rop_forward(random_tensor(Shape{2, 3, 12, 9}, 1, 0, 1), w);
  ASSERT_EQ(y.shape(), (Shape{2, 3, 12, 9}));
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_LT(rank_one_defect(slice(y, n, c)), 1e-5);
}

TEST(Ropnet, MatchesReplayedBranchPooling) {
  std::mt19937_64 rng(4);
  const RopWeights w = RopWeights::init(small_rop(3), Initializer::kXavierUniform, rng);
  const Tensor x = random_tensor(Shape{1, 3, 6, 7}, 2, 0, 1);
  const Tensor col = rop_branch_forward(x, w.column);
  const Tensor row = rop_branch_forward(x, w.row);
  const Tensor y = rop_forward(x, w);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < 6; ++i) {
      double cm = 0.0;
      for (std::size_t j = 0; j < 7; ++j) cm += col.at(0, c, i, j);
      cm /= 7.0;
      for (std::size_t j = 0; j < 7; ++j) {
        double rm = 0.0;
        for (std::size_t k = 0; k < 6; ++k) rm += row.at(0, c, k, j);
        rm /= 6.0;
        EXPECT_NEAR(y.at(0, c, i, j), cm * rm, 1e-5);
      }
    }
  }
}

TEST(Ropnet, ExportLoadRoundTrip) {
  std::mt19937_64 rng(5);
  const RopWeights w = RopWeights::init(small_rop(), Initializer::kMsraNormal, rng);
  ModelWeights named;
  w.export_to(named, "p.");
  const RopWeights back = RopWeights::load(named, "p.");
  EXPECT_EQ(back.config.channels_wide, 8u);
  EXPECT_EQ(back.config.channels_narrow, 4u);
  EXPECT_EQ(back.column.blocks.size(), 3u);
  const Tensor x = random_tensor(Shape{1, 1, 5, 5}, 9, 0, 1);
  EXPECT_EQ(max_abs_diff(rop_forward(x, w), rop_forward(x, back)), 0.0);
}

TEST(Ropnet, WeightGradientsPassFiniteDifferences) {
  std::mt19937_64 rng(6);
  RopWeights w = RopWeights::init(small_rop(), Initializer::kXavierUniform, rng);
  ModelWeights named;
  w.export_to(named, "");
  const Tensor x = random_tensor(Shape{1, 1, 8, 8}, 11, 0, 1);
  const Tensor target = random_tensor(Shape{1, 1, 8, 8}, 12, 0, 1);
  std::vector<Tensor> params;
  for (const auto& [name, t] : named) params.push_back(t);
  testing::GradFn<float> f = [&](const std::vector<Tensor>&) {
    return ops::loss_norm(rop_forward(x, w), target, 2);
  };
  const auto r = testing::gradcheck<float>(f, params, rng, 1e-3, 8);
  // Whole-network check in 32-bit: rounding through eight stacked convs is
  // well above the per-primitive bound, so the budget is looser here.
  EXPECT_LT(r.rel_error, 1e-2);
}

TEST(Rodec, ComponentsAndResidualReconstructInput) {
  const RodecWeights dec = random_rodec(3, 1, 8, 4, 21);
  const Tensor x = random_tensor(Shape{2, 1, 10, 10}, 22, 0, 1);
  const RodecOutput out = rodec_forward(x, dec);
  ASSERT_EQ(out.components.size(), 3u);
  const Tensor back = ops::add(out.low_rank(), out.residual());
  EXPECT_LT(max_abs_diff(back, x), 1e-5);
  for (std::size_t l = 0; l < 3; ++l)
    EXPECT_LT(rank_one_defect(slice(out.components[l], 1, 0)), 1e-5);
}

TEST(Rodec, SingleLevelIsOneProjection) {
  const RodecWeights dec = random_rodec(1, 1, 8, 4, 23);
  const Tensor x = random_tensor(Shape{1, 1, 6, 6}, 24, 0, 1);
  const RodecOutput out = rodec_forward(x, dec);
  EXPECT_EQ(max_abs_diff(out.components[0], rop_forward(x, dec.units[0])), 0.0);
}

TEST(Rodec, UnsupervisedLossIsMeanResidualEnergy) {
  const RodecWeights dec = random_rodec(2, 1, 8, 4, 25);
  const Tensor x = random_tensor(Shape{2, 1, 6, 6}, 26, 0, 1);
  const RodecOutput out = rodec_forward(x, dec);
  double expected = 0.0;
  for (const auto& e : out.residuals) {
    double s = 0.0;
    for (float v : e.data()) s += static_cast<double>(v) * v;
    expected += s / e.numel();
  }
  expected /= 2.0;
  EXPECT_NEAR(loss_dec_unsup(out).item(), expected, 1e-6);
}

TEST(Rodec, SupervisedLossVanishesAtTheOracle) {
  const Tensor x = random_tensor(Shape{2, 1, 8, 8}, 27, 0, 1);
  SvdCache cache;
  const auto targets = cache.targets(x, 2);
  RodecOutput fake;
  fake.components = targets;
  fake.residuals = {ops::sub(x, targets[0]), ops::sub(ops::sub(x, targets[0]), targets[1])};
  EXPECT_NEAR(loss_dec_sup(fake, targets).item(), 0.0, 1e-12);
  EXPECT_EQ(cache.misses(), 2u);
  cache.targets(x, 2);
  EXPECT_EQ(cache.hits(), 2u);
  EXPECT_EQ(cache.size(), 2u);
}

TEST(Rodec, OracleTargetsMatchSvdDecompose) {
  const Tensor x = random_tensor(Shape{1, 1, 7, 9}, 28, 0, 1);
  SvdCache cache;
  const auto targets = cache.targets(x, 2);
  const Decomposition d = svd_decompose(image_from_tensor(x, 0), 2);
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t j = 0; j < 9; ++j)
        EXPECT_NEAR(targets[l].at(0, 0, i, j), d.components[l][0](i, j), 1e-5);
}

TEST(Rodec, RejectsTooManyLevels) {
  RodecConfig c;
  c.levels = 7;
  c.rop = small_rop();
  std::mt19937_64 rng(1);
  EXPECT_THROW(RodecWeights::init(c, Initializer::kXavierUniform, rng), ConfigError);
}

RorecConfig tiny_rorec(std::size_t scale, bool aux) {
  RorecConfig c;
  c.depth_ros = c.depth_res = c.depth_fus = 1;
  c.ros = c.res = c.fus = {8, 4};
  c.scale = scale;
  c.upsample_width = 8;
  c.aux_upsample_width = 4;
  c.image_channels = 1;
  c.levels = 2;
  c.deep_supervision = aux;
  return c;
}

TEST(Rorec, OutputShapesFollowScale) {
  const RodecWeights dec = random_rodec(2, 1, 8, 4, 31);
  std::mt19937_64 rng(32);
  const Tensor x = random_tensor(Shape{2, 1, 6, 5}, 33, 0, 1);
  for (std::size_t s : {1u, 2u, 4u}) {
    const RorecWeights rec = RorecWeights::init(tiny_rorec(s, false), Initializer::kMsraNormal, rng);
    EXPECT_EQ(ronet_forward(x, dec, rec).shape(), (Shape{2, 1, 6 * s, 5 * s}));
  }
  RorecConfig bad = tiny_rorec(3, false);
  EXPECT_THROW(RorecWeights::init(bad, Initializer::kMsraNormal, rng), ConfigError);
}

TEST(Rorec, IdentityWiringReturnsTheSource) {
  const RodecWeights dec = random_rodec(2, 1, 8, 4, 34);
  const RorecWeights rec = testing::identity_rorec(2, 1);
  const Tensor x = random_tensor(Shape{1, 1, 8, 8}, 35, 0, 1);
  EXPECT_LT(max_abs_diff(ronet_forward(x, dec, rec), x), 1e-5);
}

TEST(Rorec, ZeroResidualScaleSkipsBlocks) {
  const RodecWeights dec = random_rodec(2, 1, 8, 4, 36);
  std::mt19937_64 rng(37);
  RorecConfig c = tiny_rorec(1, false);
  c.use_bn = false;
  RorecWeights rec = RorecWeights::init(c, Initializer::kMsraNormal, rng);
  const Tensor x = random_tensor(Shape{1, 1, 6, 6}, 38, 0, 1);
  rec.config.residual_scale = 0.0;
  const Tensor a = ronet_forward(x, dec, rec);
  for (auto& blk : rec.ros.blocks) {
    for (auto& v : blk.reduce.weight.mutable_data()) v *= 3.0f;
  }
  EXPECT_EQ(max_abs_diff(a, ronet_forward(x, dec, rec)), 0.0);
}

TEST(Rorec, LossTermsCombineAsDocumented) {
  const RodecWeights dec = random_rodec(2, 1, 8, 4, 39);
  std::mt19937_64 rng(40);
  const RorecWeights rec = RorecWeights::init(tiny_rorec(2, true), Initializer::kMsraNormal, rng);
  const Tensor src = random_tensor(Shape{2, 1, 6, 6}, 41, 0, 1);
  const Tensor tgt = random_tensor(Shape{2, 1, 12, 12}, 42, 0, 1);
  const RecLossTerms t = loss_rec(src, tgt, dec, rec, {0.3, 0.0, 2}, ops::BnMode::kEval);
  const double expected = 0.3 * (t.ros.item() + t.res.item()) + 0.7 * t.fus.item();
  EXPECT_NEAR(t.total.item(), expected, 1e-6 * std::max(1.0, expected));

  const RecLossTerms g = loss_rec(src, tgt, dec, rec, {0.0, 0.5, 1}, ops::BnMode::kEval);
  const double fus = ops::loss_norm(ronet_forward(src, dec, rec), tgt, 1).item() +
                     0.5 * gradient_surrogate(ronet_forward(src, dec, rec), tgt).item();
  EXPECT_NEAR(g.total.item(), fus, 1e-6);
  EXPECT_FALSE(g.ros.defined());
}

TEST(Rorec, LambdaOneLeavesFusionUntouchedAndDecFrozen) {
  const RodecWeights dec = random_rodec(2, 1, 8, 4, 43);
  std::mt19937_64 rng(44);
  const RorecWeights rec = RorecWeights::init(tiny_rorec(2, true), Initializer::kMsraNormal, rng);
  ModelWeights named = rec.named();
  named.set_trainable(true);
  ModelWeights dec_named = dec.named();
  dec_named.set_trainable(false);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = loss_rec(random_tensor(Shape{1, 1, 6, 6}, 45, 0, 1),
                    random_tensor(Shape{1, 1, 12, 12}, 46, 0, 1), dec, rec, {1.0, 0.0, 2})
               .total;
  }
  tape.backward(loss);
  double fus = 0.0, ros = 0.0;
  for (const auto& [name, t] : named) {
    double s = 0.0;
    for (float g : t.grad()) s += std::abs(g);
    if (name.starts_with("rorec.fus")) fus += s;
    if (name.starts_with("rorec.ros.")) ros += s;
  }
  EXPECT_EQ(fus, 0.0);
  EXPECT_GT(ros, 0.0);
  for (const auto& [name, t] : dec_named) {
    for (float g : t.grad()) ASSERT_EQ(g, 0.0f) << name;
  }
}

TEST(Rorec, PositiveLambdaNeedsAuxiliaryUpsamplers) {
  const RodecWeights dec = random_rodec(2, 1, 8, 4, 47);
  std::mt19937_64 rng(48);
  const RorecWeights rec = RorecWeights::init(tiny_rorec(1, false), Initializer::kMsraNormal, rng);
  const Tensor x = random_tensor(Shape{1, 1, 6, 6}, 49, 0, 1);
  EXPECT_THROW(loss_rec(x, x, dec, rec, {0.5, 0.0, 2}), ConfigError);
  EXPECT_THROW(loss_rec(x, x, dec, rec, {1.5, 0.0, 2}), ArgumentError);
}

TEST(Rorec, LevelMismatchIsAConfigError) {
  const RodecWeights dec = random_rodec(3, 1, 8, 4, 50);
  std::mt19937_64 rng(51);
  const RorecWeights rec = RorecWeights::init(tiny_rorec(1, false), Initializer::kMsraNormal, rng);
  EXPECT_THROW(ronet_forward(random_tensor(Shape{1, 1, 6, 6}, 52, 0, 1), dec, rec), ConfigError);
}

TEST(Rorec, NamedLoadRoundTrip) {
  std::mt19937_64 rng(53);
  RorecConfig c = tiny_rorec(4, true);
  c.residual_scale = 0.1;
  const RorecWeights rec = RorecWeights::init(c, Initializer::kMsraNormal, rng);
  const RorecWeights back = RorecWeights::load(rec.named());
  EXPECT_EQ(back.config.scale, 4u);
  EXPECT_TRUE(back.config.deep_supervision);
  EXPECT_NEAR(back.config.residual_scale, 0.1, 1e-7);
  EXPECT_TRUE(bit_identical(rec.named(), back.named()));
}

TEST(Presets, KnownTasksAndWidthScaling) {
  EXPECT_EQ(task_preset("sr-noisefree").rorec.scale, 4u);
  EXPECT_EQ(task_preset("denoise-gray").rorec.image_channels, 1u);
  EXPECT_THROW(task_preset("deblur"), ConfigError);
  const RorecConfig half = scaled_widths(task_preset("denoise-color").rorec, 2);
  EXPECT_EQ(half.res.wide, task_preset("denoise-color").rorec.res.wide / 2);
  EXPECT_THROW(scaled_widths(half, 0), ConfigError);
}

}  // namespace
}  // namespace ronet
