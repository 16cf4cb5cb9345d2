#include "ronet/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "ronet/checkpoint.hpp"
#include "ronet/config.hpp"
#include "ronet/degradation.hpp"
#include "ronet/errors.hpp"
#include "ronet/image_io.hpp"
#include "ronet/metrics.hpp"
#include "ronet/rank_one.hpp"
#include "ronet/training.hpp"

namespace ronet {
namespace fs = std::filesystem;
namespace {

// Raised for conditions CLI11 cannot see (e.g. inconsistent flag values).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<Image> load_all(const std::vector<fs::path>& files) {
  std::vector<Image> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(load_png(f));
  return out;
}

std::vector<fs::path> require_pngs(const fs::path& dir) {
  auto files = list_pngs(dir);
  if (files.empty()) throw UsageError("no PNG files in '" + dir.string() + "'");
  return files;
}

// ---------------------------------------------------------------- decompose

struct DecomposeArgs {
  std::string input;
  std::string out;
  std::string method = "svd";
  std::string weights;
  std::size_t levels = 3;
};

// Maps a plane image to [0, 1] and records how to undo it.
std::string save_affine(const Image& img, const fs::path& path) {
  const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
  const double offset = *lo;
  const double scale = *hi > *lo ? *hi - *lo : 1.0;
  Image mapped = img;
  for (double& v : mapped.data) v = (v - offset) / scale;
  save_png(mapped, path);
  std::ostringstream os;
  os.precision(17);
  os << path.filename().string() << " offset=" << offset << " scale=" << scale
     << " max_quantization_error=" << scale / 510.0;
  return os.str();
}

int run_decompose(const DecomposeArgs& a, std::ostream& out) {
  const Image img = load_png(a.input);
  Decomposition d;
  if (a.method == "svd") {
    d = svd_decompose(img, a.levels);
  } else {
    if (a.weights.empty()) throw UsageError("--method learned requires --weights");
    const RodecWeights dec = RodecWeights::load(load_checkpoint(a.weights));
    if (dec.config.levels != a.levels) {
      throw UsageError("--L " + std::to_string(a.levels) + " but the checkpoint has " +
                       std::to_string(dec.config.levels) + " levels");
    }
    NoGradScope no_grad;
    d = rodec_forward(to_tensor(img), dec).to_decomposition();
  }
  fs::create_directories(a.out);
  std::vector<std::string> lines = {
      "# value = png / 255 * scale + offset; input = sum(components) + residual",
      "method=" + a.method, "levels=" + std::to_string(a.levels),
      "source=" + fs::path(a.input).filename().string()};
  for (std::size_t l = 0; l < d.levels(); ++l) {
    lines.push_back(save_affine(component_image(d, l),
                                fs::path(a.out) / ("component" + std::to_string(l + 1) + ".png")));
  }
  lines.push_back(save_affine(residual_image(d), fs::path(a.out) / "residual.png"));
  std::ofstream side(fs::path(a.out) / "decomposition.txt");
  for (const auto& l : lines) side << l << '\n';
  out << "wrote " << d.levels() << " components and the residual to " << a.out << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------ degrade

struct DegradeArgs {
  std::string input;
  std::string out;
  std::string kind = "awgn";
  double sigma = 25.0;
  std::size_t scale = 4;
  std::size_t length = 9;
  double angle = 0.0;
  double peak = 255.0;
  std::uint64_t seed = 0;
};

std::vector<DegradationSpec> degrade_chain(const DegradeArgs& a, std::uint64_t seed) {
  DegradationSpec s;
  s.seed = seed;
  if (a.kind == "awgn") {
    s.kind = DegradationKind::kAwgn;
    s.sigma = a.sigma;
  } else if (a.kind == "bicubic-down") {
    s.kind = DegradationKind::kBicubicDown;
    s.scale = a.scale;
  } else if (a.kind == "motion-blur") {
    s.kind = DegradationKind::kMotionBlur;
    s.blur_length = a.length;
    s.blur_angle_deg = a.angle;
  } else if (a.kind == "poisson") {
    s.kind = DegradationKind::kPoisson;
    s.peak = a.peak;
  } else {
    return realistic_chain(a.scale, a.length, a.angle, a.peak, seed);
  }
  return {s};
}

int run_degrade(const DegradeArgs& a, std::ostream& out) {
  const auto files = require_pngs(a.input);
  const fs::path hr = fs::path(a.out) / "hr";
  const fs::path lr = fs::path(a.out) / "lr";
  fs::create_directories(hr);
  fs::create_directories(lr);
  std::ofstream manifest(fs::path(a.out) / "manifest.txt");
  manifest << "# degrade manifest: file | spec chain (left to right)\n"
           << "kind=" << a.kind << " base_seed=" << a.seed << '\n';
  for (std::size_t i = 0; i < files.size(); ++i) {
    const std::uint64_t seed = a.seed + i;
    const auto chain = degrade_chain(a, seed);
    Image target = load_png(files[i]);
    DegradationLog log;
    // Keep hr/lr aligned when downsampling has to crop.
    for (const auto& s : chain) {
      if (s.kind == DegradationKind::kBicubicDown) {
        target = target.crop(0, 0, target.height / s.scale * s.scale,
                             target.width / s.scale * s.scale);
      }
    }
    const Image source = compose(load_png(files[i]), chain, &log);
    const auto name = files[i].filename();
    save_png(target, hr / name);
    save_png(source, lr / name);
    manifest << name.string();
    for (const auto& s : chain) manifest << " | " << s.str();
    for (const auto& note : log) manifest << " | note: " << note;
    manifest << '\n';
  }
  out << "degraded " << files.size() << " images into " << a.out << '\n';
  return kExitOk;
}

// -------------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
};

RunConfig resolve_config(const TrainArgs& a) {
  RunConfig cfg = RunConfig::load(a.config);
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  if (cfg.train_dir.empty()) throw UsageError("config: train_dir is required");
  return cfg;
}

std::string format_loss(const std::vector<LossLogRow>& log) {
  std::ostringstream os;
  os.precision(9);
  os << log.back().loss;
  return os.str();
}

int run_train_rodec(const TrainArgs& a, std::ostream& out) {
  const RunConfig cfg = resolve_config(a);
  const std::vector<Image> images = load_all(require_pngs(cfg.train_dir));
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);

  std::mt19937_64 rng(cfg.seed);
  RodecWeights dec = RodecWeights::init({cfg.levels, cfg.rop_config(images.front().channels)},
                                        parse_initializer(cfg.init), rng);
  RodecTrainOptions opt;
  opt.steps = cfg.steps;
  opt.batch = cfg.batch;
  opt.patch = cfg.patch;
  opt.schedule = cfg.schedule();
  opt.objective = cfg.supervised ? DecObjective::kSupervised : DecObjective::kUnsupervised;
  opt.seed = cfg.seed;
  opt.log_every = cfg.log_every;
  std::ofstream csv(dir / "loss_rodec.csv");
  write_loss_csv_header(csv);
  opt.csv = &csv;
  const auto log = train_rodec(dec, images, opt);

  const ModelWeights named = dec.named();
  save_checkpoint(named, dir / "rodec.ckpt");
  write_manifest(dir, cfg,
                 {"command = train-rodec", "images = " + std::to_string(images.size()),
                  "checkpoint = rodec.ckpt", "weights_hash = " + named.content_hash_hex(),
                  "final_loss = " + format_loss(log)});
  out << "train-rodec: final loss " << format_loss(log) << ", weights "
      << named.content_hash_hex() << '\n';
  return kExitOk;
}

int run_train_ronet(const TrainArgs& a, std::ostream& out) {
  const RunConfig cfg = resolve_config(a);
  if (cfg.rodec_checkpoint.empty()) throw UsageError("config: rodec_checkpoint is required");
  if (!fs::exists(cfg.rodec_checkpoint)) {
    throw UsageError("rodec_checkpoint '" + cfg.rodec_checkpoint + "' does not exist");
  }
  const auto target_files = require_pngs(cfg.train_dir);
  const std::vector<Image> targets = load_all(target_files);
  std::vector<Image> sources;
  if (!cfg.source_dir.empty()) {
    for (const auto& f : target_files) sources.push_back(load_png(fs::path(cfg.source_dir) / f.filename()));
  }
  RodecWeights dec = RodecWeights::load(load_checkpoint(cfg.rodec_checkpoint));
  RorecConfig rc = cfg.rorec_config();
  if (rc.levels != dec.config.levels) {
    throw ConfigError("config levels = " + std::to_string(rc.levels) + " but the RODec has " +
                      std::to_string(dec.config.levels));
  }
  if (rc.image_channels != targets.front().channels) {
    throw ConfigError("task " + cfg.task + " expects " + std::to_string(rc.image_channels) +
                      "-channel images, got " + targets.front().shape_str());
  }
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  std::mt19937_64 rng(cfg.seed);
  RorecWeights rec = RorecWeights::init(rc, parse_initializer(cfg.init), rng);

  RorecTrainOptions opt;
  opt.steps = cfg.steps;
  opt.batch = cfg.batch;
  opt.patch = cfg.patch;
  opt.schedule = cfg.schedule();
  opt.loss = {cfg.lambda, cfg.eta, cfg.alpha};
  opt.sigma = cfg.sigma;
  opt.end_to_end = cfg.end_to_end;
  opt.seed = cfg.seed;
  opt.log_every = cfg.log_every;
  std::ofstream csv(dir / "loss_ronet.csv");
  write_loss_csv_header(csv);
  opt.csv = &csv;
  const auto log = train_rorec(rec, dec, targets, sources, opt);

  ModelWeights named = dec.named();
  named.append(rec.named());
  save_checkpoint(named, dir / "ronet.ckpt");
  write_manifest(dir, cfg,
                 {"command = train-ronet", "images = " + std::to_string(targets.size()),
                  "checkpoint = ronet.ckpt", "weights_hash = " + named.content_hash_hex(),
                  "final_loss = " + format_loss(log)});
  out << "train-ronet: final loss " << format_loss(log) << ", weights "
      << named.content_hash_hex() << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------ restore

struct RestoreArgs {
  std::string checkpoint;
  std::string input;
  std::string out;
  bool save_raw = false;
};

int run_restore(const RestoreArgs& a, std::ostream& out) {
  const ModelWeights named = load_checkpoint(a.checkpoint);
  const RodecWeights dec = RodecWeights::load(named);
  const RorecWeights rec = RorecWeights::load(named);
  const auto files = require_pngs(a.input);
  fs::create_directories(a.out);
  for (const auto& f : files) {
    const Image source = load_png(f);
    if (source.channels != rec.config.image_channels) {
      throw ConfigError("'" + f.string() + "' has " + std::to_string(source.channels) +
                        " channels, the model expects " +
                        std::to_string(rec.config.image_channels));
    }
    const Tensor restored = restore(to_tensor(source), dec, rec);
    save_png(image_from_tensor(restored), fs::path(a.out) / f.filename());
    if (a.save_raw) {
      ModelWeights raw;
      raw.add("restored", restored);
      save_checkpoint(raw, fs::path(a.out) / (f.stem().string() + ".raw"));
    }
  }
  out << "restored " << files.size() << " images into " << a.out << '\n';
  return kExitOk;
}

// ----------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string restored;
  std::string truth;
  std::string out;
  std::string protocol = "rgb";
  std::size_t border = 4;
  std::size_t crop = 60;
  std::size_t max_shift = 40;
  bool axis_only = false;
};

Image luma_image(const Image& rgb, std::size_t border) {
  const Matrix y = y_channel(rgb);
  Image img(1, rgb.height - 2 * border, rgb.width - 2 * border);
  for (std::size_t i = 0; i < img.height; ++i) {
    for (std::size_t j = 0; j < img.width; ++j) img.at(0, i, j) = y(i + border, j + border) / 255.0;
  }
  return img;
}

int run_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const auto files = require_pngs(a.restored);
  const auto search = a.axis_only ? ShiftSearch::kAxisOnly : ShiftSearch::kFullGrid;
  std::string protocol = a.protocol;
  if (a.protocol == "y") {
    protocol = "y-studio-border" + std::to_string(a.border);
  } else if (a.protocol == "shifted") {
    protocol = "shifted-crop" + std::to_string(a.crop) + "-max" + std::to_string(a.max_shift) +
               (a.axis_only ? "-axis" : "-grid");
  }
  MetricReport report;
  for (const auto& f : files) {
    const fs::path truth_path = fs::path(a.truth) / f.filename();
    if (!fs::exists(truth_path)) throw UsageError("no ground truth for '" + f.string() + "'");
    const Image x = load_png(f);
    const Image y = load_png(truth_path);
    MetricRow row{f.stem().string(), protocol, 0.0, 0.0};
    if (a.protocol == "rgb") {
      row.psnr = psnr(x, y);
      row.ssim = ssim(x, y);
    } else if (a.protocol == "y") {
      row.psnr = y_channel_psnr(x, y, a.border);
      row.ssim = ssim(luma_image(x, a.border), luma_image(y, a.border));
    } else {
      row.psnr = shifted_max_psnr(x, y, a.crop, a.max_shift, search).value;
      row.ssim = shifted_max_ssim(x, y, a.crop, a.max_shift, search).value;
    }
    report.rows.push_back(row);
  }
  std::ofstream csv(a.out);
  if (!csv) throw IoError("cannot write '" + a.out + "'");
  report.write_csv(csv);
  out << "evaluated " << files.size() << " images, mean psnr "
      << format_psnr(report.mean_psnr()) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rank-one decomposition and reconstruction toolkit", "ronet"};
  app.require_subcommand(1);

  DecomposeArgs dec;
  auto* cmd_dec = app.add_subcommand("decompose", "Split an image into rank-one components");
  cmd_dec->add_option("--input", dec.input, "Input PNG")->required()->check(CLI::ExistingFile);
  cmd_dec->add_option("--out", dec.out, "Output directory")->required();
  cmd_dec->add_option("--method", dec.method, "svd or learned")
      ->check(CLI::IsMember({"svd", "learned"}));
  cmd_dec->add_option("--weights", dec.weights, "RODec checkpoint (learned)")
      ->check(CLI::ExistingFile);
  cmd_dec->add_option("--L", dec.levels, "Number of components")->check(CLI::Range(1, 64));

  DegradeArgs deg;
  auto* cmd_deg = app.add_subcommand("degrade", "Synthesize hr/lr pairs from clean PNGs");
  cmd_deg->add_option("--input", deg.input, "Directory of clean PNGs")
      ->required()->check(CLI::ExistingDirectory);
  cmd_deg->add_option("--out", deg.out, "Output directory")->required();
  cmd_deg->add_option("--kind", deg.kind)
      ->check(CLI::IsMember({"awgn", "bicubic-down", "motion-blur", "poisson", "realistic"}));
  cmd_deg->add_option("--sigma", deg.sigma, "AWGN level, 0-255 scale")->check(CLI::Range(0.0, 75.0));
  cmd_deg->add_option("--scale", deg.scale)->check(CLI::Range(1, 8));
  cmd_deg->add_option("--length", deg.length, "Motion blur length")->check(CLI::PositiveNumber);
  cmd_deg->add_option("--angle", deg.angle, "Motion blur angle, degrees");
  cmd_deg->add_option("--peak", deg.peak, "Poisson peak")->check(CLI::PositiveNumber);
  cmd_deg->add_option("--seed", deg.seed);

  TrainArgs tr_dec;
  auto* cmd_trd = app.add_subcommand("train-rodec", "Train the decomposition cascade");
  cmd_trd->add_option("--config", tr_dec.config, "key = value run config")
      ->required()->check(CLI::ExistingFile);
  cmd_trd->add_option("--set", tr_dec.overrides, "Override a config key (key=value)");

  TrainArgs tr_net;
  auto* cmd_trn = app.add_subcommand("train-ronet", "Train the reconstruction network");
  cmd_trn->add_option("--config", tr_net.config, "key = value run config")
      ->required()->check(CLI::ExistingFile);
  cmd_trn->add_option("--set", tr_net.overrides, "Override a config key (key=value)");

  RestoreArgs res;
  auto* cmd_res = app.add_subcommand("restore", "Restore a directory of PNGs");
  cmd_res->add_option("--checkpoint", res.checkpoint)->required()->check(CLI::ExistingFile);
  cmd_res->add_option("--input", res.input)->required()->check(CLI::ExistingDirectory);
  cmd_res->add_option("--out", res.out)->required();
  cmd_res->add_flag("--save-raw", res.save_raw, "Also write unquantized outputs");

  EvaluateArgs ev;
  auto* cmd_ev = app.add_subcommand("evaluate", "Score restored PNGs against ground truth");
  cmd_ev->add_option("--restored", ev.restored)->required()->check(CLI::ExistingDirectory);
  cmd_ev->add_option("--truth", ev.truth)->required()->check(CLI::ExistingDirectory);
  cmd_ev->add_option("--out", ev.out, "CSV report path")->required();
  cmd_ev->add_option("--protocol", ev.protocol)->check(CLI::IsMember({"rgb", "y", "shifted"}));
  cmd_ev->add_option("--border", ev.border);
  cmd_ev->add_option("--crop", ev.crop);
  cmd_ev->add_option("--max-shift", ev.max_shift);
  cmd_ev->add_flag("--axis-only", ev.axis_only, "Search axis-aligned shifts only");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*cmd_dec) return run_decompose(dec, out);
    if (*cmd_deg) return run_degrade(deg, out);
    if (*cmd_trd) return run_train_rodec(tr_dec, out);
    if (*cmd_trn) return run_train_ronet(tr_net, out);
    if (*cmd_res) return run_restore(res, out);
    if (*cmd_ev) return run_evaluate(ev, out);
  } catch (const UsageError& e) {
    err << "ronet: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "ronet: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace ronet
