#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ronet/adam.hpp"
#include "ronet/rorec.hpp"

namespace ronet {

// Everything a training run depends on. Parsed from flat "key = value" text
// ('#' starts a comment); every field is echoed into the run manifest.
struct RunConfig {
  std::string task = "denoise-gray";
  std::uint64_t seed = 0;

  // Data.
  std::string train_dir;   // clean (target) PNGs
  std::string source_dir;  // paired degraded PNGs; empty -> synthesize AWGN
  std::string out_dir = "run";
  std::string rodec_checkpoint;  // train-ronet: frozen decomposition weights
  double sigma = 25.0;           // on-the-fly AWGN level, 0-255 scale

  // Optimization.
  std::size_t steps = 1000;
  std::size_t batch = 4;
  std::size_t patch = 64;  // target-side patch size
  double lr = 1e-4;
  std::size_t lr_drop_at = 0;
  double lr_drop_to = 1e-5;
  std::size_t lr_decay_every = 0;
  double lr_decay_factor = 0.5;
  std::string init = "xavier-uniform";
  std::size_t log_every = 1;
  std::size_t checkpoint_every = 0;  // 0: only at the end

  // Decomposition.
  std::size_t levels = 1;
  std::size_t rop_wide = 256;
  std::size_t rop_narrow = 64;
  bool supervised = false;

  // Reconstruction.
  double lambda = 0.0;
  double eta = 0.0;
  int alpha = 2;
  std::size_t width_divisor = 1;
  bool end_to_end = false;

  // Values of the preset named `task` (levels, lambda, eta, alpha); other
  // fields keep their defaults.
  static RunConfig for_task(std::string_view task);

  // Starts from for_task(task) when the text sets `task`, then applies every
  // key. Unknown keys and malformed values raise ConfigError.
  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);
  void set(std::string_view key, std::string_view value);

  // One "key = value" line per field, in declaration order.
  std::string echo() const;
  static std::vector<std::string> keys();

  LrSchedule schedule() const;
  RorecConfig rorec_config() const;
  RopConfig rop_config(std::size_t channels) const;
  void validate() const;
};

// Writes `<dir>/manifest.txt`: the config echo followed by `extra` lines.
void write_manifest(const std::filesystem::path& dir, const RunConfig& config,
                    const std::vector<std::string>& extra);

}  // namespace ronet
