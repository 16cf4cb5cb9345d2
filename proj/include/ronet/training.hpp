#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "ronet/adam.hpp"
#include "ronet/image.hpp"
#include "ronet/rorec.hpp"

namespace ronet {

struct LossLogRow {
  std::size_t step = 0;  // 1-based update index
  double loss = 0.0;     // batch loss before the update
  double lr = 0.0;
  double wall_ms = 0.0;  // since the start of training
};

// Header "step,loss,lr,wall-ms"; rows are flushed as they are written so an
// interrupted run leaves a valid prefix.
void write_loss_csv_header(std::ostream& os);
void write_loss_csv_row(std::ostream& os, const LossLogRow& row);

enum class DecObjective { kUnsupervised, kSupervised };

struct RodecTrainOptions {
  std::size_t steps = 1000;
  std::size_t batch = 8;
  std::size_t patch = 32;
  LrSchedule schedule;
  DecObjective objective = DecObjective::kUnsupervised;
  std::uint64_t seed = 0;
  std::size_t log_every = 1;
  std::ostream* csv = nullptr;  // optional loss log sink
};

// Joint training of every RODec level on randomly sampled patches. The
// weights are updated in place; the run is a pure function of the initial
// weights, the images and the options.
std::vector<LossLogRow> train_rodec(RodecWeights& weights, std::span<const Image> images,
                                    const RodecTrainOptions& options);

struct RorecTrainOptions {
  std::size_t steps = 1000;
  std::size_t batch = 4;
  std::size_t patch = 64;  // target side
  LrSchedule schedule;
  RecLossConfig loss;
  // AWGN added to every source patch when > 0 (0-255 scale), drawn fresh
  // per step.
  double sigma = 0.0;
  bool end_to_end = false;  // also train RODec, adding its unsupervised loss
  std::uint64_t seed = 0;
  std::size_t log_every = 1;
  std::ostream* csv = nullptr;
};

// Trains RORec on (source, target) pairs. With no `sources`, sources are the
// targets themselves (scale 1) or their bicubic downsamplings (scale > 1).
// Unless end_to_end is set, `dec` is frozen and left untouched.
std::vector<LossLogRow> train_rorec(RorecWeights& rec, RodecWeights& dec,
                                    std::span<const Image> targets,
                                    std::span<const Image> sources,
                                    const RorecTrainOptions& options);

// Unsupervised RODec objective of a batch without recording gradients.
double rodec_unsup_loss(const RodecWeights& weights, const Tensor& batch);

// Inference (evaluation-mode batch norm, no recording).
Tensor restore(const Tensor& source, const RodecWeights& dec, const RorecWeights& rec);
Image restore(const Image& source, const RodecWeights& dec, const RorecWeights& rec);

// Adds AWGN to every element of a batch from `rng` (0-255 scale sigma).
Tensor add_awgn(const Tensor& batch, double sigma, std::mt19937_64& rng);

}  // namespace ronet
