#include "ronet/training.hpp"

#include <chrono>
#include <iomanip>
#include <ostream>

#include "ronet/degradation.hpp"
#include "ronet/errors.hpp"
#include "ronet/patches.hpp"

namespace ronet {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Sampler and noise streams must not overlap even when seeds are reused
// between runs.
constexpr std::uint64_t kNoiseStream = 0x9E3779B97F4A7C15ULL;

void log_step(std::vector<LossLogRow>& log, const LossLogRow& row, std::size_t every,
              std::size_t steps, std::ostream* csv) {
  if (row.step % every != 0 && row.step != steps && row.step != 1) return;
  log.push_back(row);
  if (csv) write_loss_csv_row(*csv, row);
}

void check_finite(double loss, std::size_t step) {
  if (!std::isfinite(loss)) {
    throw ContractError("training diverged: loss is " + std::to_string(loss) + " at step " +
                        std::to_string(step));
  }
}

}  // namespace

void write_loss_csv_header(std::ostream& os) { os << "step,loss,lr,wall-ms\n" << std::flush; }

void write_loss_csv_row(std::ostream& os, const LossLogRow& row) {
  os << row.step << ',' << std::setprecision(9) << row.loss << ',' << row.lr << ','
     << std::fixed << std::setprecision(1) << row.wall_ms << std::defaultfloat << '\n'
     << std::flush;
}

std::vector<LossLogRow> train_rodec(RodecWeights& weights, std::span<const Image> images,
                                    const RodecTrainOptions& options) {
  if (options.steps == 0 || options.batch == 0) {
    throw ArgumentError("train_rodec: steps and batch must be positive");
  }
  if (images.empty()) throw ConfigError("train_rodec: empty dataset");
  PatchSampler sampler(images, options.patch, options.seed);
  ModelWeights params = weights.named();
  params.set_trainable(true);
  Adam adam;
  SvdCache cache;
  std::vector<LossLogRow> log;
  const auto start = Clock::now();
  for (std::size_t step = 1; step <= options.steps; ++step) {
    const Tensor batch = sampler.next(options.batch).batch;
    Tape tape;
    Tensor loss;
    {
      TapeScope scope(tape);
      loss = options.objective == DecObjective::kSupervised
                 ? loss_dec_sup(batch, weights, cache)
                 : loss_dec_unsup(batch, weights);
    }
    check_finite(loss.item(), step);
    tape.backward(loss);
    const double lr = options.schedule.at(step - 1);
    adam.step(params, lr);
    params.zero_grad();
    log_step(log, {step, loss.item(), lr, elapsed_ms(start)}, options.log_every,
             options.steps, options.csv);
  }
  return log;
}

std::vector<LossLogRow> train_rorec(RorecWeights& rec, RodecWeights& dec,
                                    std::span<const Image> targets,
                                    std::span<const Image> sources,
                                    const RorecTrainOptions& options) {
  if (options.steps == 0 || options.batch == 0) {
    throw ArgumentError("train_rorec: steps and batch must be positive");
  }
  if (targets.empty()) throw ConfigError("train_rorec: empty dataset");
  if (!sources.empty() && sources.size() != targets.size()) {
    throw ConfigError("train_rorec: " + std::to_string(sources.size()) + " sources for " +
                      std::to_string(targets.size()) + " targets");
  }
  const std::size_t scale = rec.config.scale;
  if (options.patch % scale != 0) {
    throw ArgumentError("train_rorec: patch " + std::to_string(options.patch) +
                        " is not divisible by scale " + std::to_string(scale));
  }
  std::vector<Image> synthesized;
  std::vector<Image> cropped_targets;
  if (sources.empty()) {
    if (scale == 1) {
      sources = targets;
    } else {
      for (const Image& t : targets) {
        const std::size_t h = t.height / scale * scale;
        const std::size_t w = t.width / scale * scale;
        cropped_targets.push_back(t.crop(0, 0, h, w));
        synthesized.push_back(bicubic_downsample(cropped_targets.back(), scale));
      }
      targets = cropped_targets;
      sources = synthesized;
    }
  }
  PairedPatchSampler sampler(sources, targets, options.patch / scale, scale, options.seed);
  std::mt19937_64 noise_rng(options.seed ^ kNoiseStream);

  ModelWeights params = rec.named();
  params.set_trainable(true);
  dec.set_trainable(options.end_to_end);
  if (options.end_to_end) params.append(dec.named());

  Adam adam;
  std::vector<LossLogRow> log;
  const auto start = Clock::now();
  for (std::size_t step = 1; step <= options.steps; ++step) {
    PairedPatchBatch pair = sampler.next(options.batch);
    const Tensor source =
        options.sigma > 0.0 ? add_awgn(pair.source, options.sigma, noise_rng) : pair.source;
    Tape tape;
    RecLossTerms terms;
    {
      TapeScope scope(tape);
      terms = loss_rec(source, pair.target, dec, rec, options.loss, ops::BnMode::kTrain);
      // End-to-end mode keeps the decomposition objective in the loss.
      if (options.end_to_end) terms.total = ops::add(terms.total, loss_dec_unsup(source, dec));
    }
    check_finite(terms.total.item(), step);
    tape.backward(terms.total);
    const double lr = options.schedule.at(step - 1);
    adam.step(params, lr);
    params.zero_grad();
    log_step(log, {step, terms.total.item(), lr, elapsed_ms(start)}, options.log_every,
             options.steps, options.csv);
  }
  dec.set_trainable(false);
  return log;
}

double rodec_unsup_loss(const RodecWeights& weights, const Tensor& batch) {
  NoGradScope no_grad;
  return loss_dec_unsup(batch, weights).item();
}

Tensor restore(const Tensor& source, const RodecWeights& dec, const RorecWeights& rec) {
  NoGradScope no_grad;
  return ronet_forward(source, dec, rec, ops::BnMode::kEval);
}

Image restore(const Image& source, const RodecWeights& dec, const RorecWeights& rec) {
  return image_from_tensor(restore(to_tensor(source), dec, rec));
}

Tensor add_awgn(const Tensor& batch, double sigma, std::mt19937_64& rng) {
  if (!(sigma >= 0.0) || sigma > kMaxSigma) throw ArgumentError("add_awgn: sigma out of [0, 75]");
  Tensor out = batch.clone();
  std::normal_distribution<double> noise(0.0, sigma / 255.0);
  for (float& v : out.mutable_data()) v = static_cast<float>(v + noise(rng));
  return out;
}

}  // namespace ronet
