#include "ronet/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>

#include "ronet/errors.hpp"
#include "ronet/weights.hpp"

namespace ronet {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config: '" + std::string(key) + "' expects a number, got '" +
                      std::string(value) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config: '" + std::string(key) + "' expects true/false, got '" +
                    std::string(value) + "'");
}

std::string show(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  std::string_view key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

template <typename T>
Field field(std::string_view key, T RunConfig::*member) {
  Field f{key, {}, {}};
  f.get = [member](const RunConfig& c) {
    const T& v = c.*member;
    if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_same_v<T, bool>) {
      return std::string(v ? "true" : "false");
    } else if constexpr (std::is_floating_point_v<T>) {
      return show(v);
    } else {
      return std::to_string(v);
    }
  };
  f.set = [member, key](RunConfig& c, std::string_view value) {
    if constexpr (std::is_same_v<T, std::string>) {
      c.*member = std::string(value);
    } else if constexpr (std::is_same_v<T, bool>) {
      c.*member = parse_bool(key, value);
    } else {
      c.*member = parse_number<T>(key, value);
    }
  };
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      field("task", &RunConfig::task),
      field("seed", &RunConfig::seed),
      field("train_dir", &RunConfig::train_dir),
      field("source_dir", &RunConfig::source_dir),
      field("out_dir", &RunConfig::out_dir),
      field("rodec_checkpoint", &RunConfig::rodec_checkpoint),
      field("sigma", &RunConfig::sigma),
      field("steps", &RunConfig::steps),
      field("batch", &RunConfig::batch),
      field("patch", &RunConfig::patch),
      field("lr", &RunConfig::lr),
      field("lr_drop_at", &RunConfig::lr_drop_at),
      field("lr_drop_to", &RunConfig::lr_drop_to),
      field("lr_decay_every", &RunConfig::lr_decay_every),
      field("lr_decay_factor", &RunConfig::lr_decay_factor),
      field("init", &RunConfig::init),
      field("log_every", &RunConfig::log_every),
      field("checkpoint_every", &RunConfig::checkpoint_every),
      field("levels", &RunConfig::levels),
      field("rop_wide", &RunConfig::rop_wide),
      field("rop_narrow", &RunConfig::rop_narrow),
      field("supervised", &RunConfig::supervised),
      field("lambda", &RunConfig::lambda),
      field("eta", &RunConfig::eta),
      field("alpha", &RunConfig::alpha),
      field("width_divisor", &RunConfig::width_divisor),
      field("end_to_end", &RunConfig::end_to_end),
  };
  return table;
}

}  // namespace

RunConfig RunConfig::for_task(std::string_view task) {
  const TaskPreset preset = task_preset(task);
  RunConfig c;
  c.task = preset.name;
  c.levels = preset.levels;
  c.lambda = preset.lambda;
  c.eta = preset.eta;
  c.alpha = preset.alpha;
  return c;
}

RunConfig RunConfig::parse(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  RunConfig c;
  for (const auto& [k, v] : entries) {
    if (k == "task") c = for_task(v);
  }
  for (const auto& [k, v] : entries) c.set(k, v);
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse(text);
}

void RunConfig::set(std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + std::string(key) + "'");
}

std::string RunConfig::echo() const {
  std::string out;
  for (const auto& f : fields()) {
    out += std::string(f.key) + " = " + f.get(*this) + "\n";
  }
  return out;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  return out;
}

LrSchedule RunConfig::schedule() const {
  return LrSchedule{lr, lr_drop_at, lr_drop_to, lr_decay_every, lr_decay_factor};
}

RorecConfig RunConfig::rorec_config() const {
  RorecConfig c = scaled_widths(task_preset(task).rorec, width_divisor);
  c.levels = levels;
  c.deep_supervision = lambda > 0.0;
  return c;
}

RopConfig RunConfig::rop_config(std::size_t channels) const {
  RopConfig c;
  c.channels_wide = rop_wide;
  c.channels_narrow = rop_narrow;
  c.out_channels = channels;
  return c;
}

void RunConfig::validate() const {
  task_preset(task);
  parse_initializer(init);
  if (steps == 0 || batch == 0 || patch == 0) {
    throw ConfigError("config: steps, batch and patch must be positive");
  }
  if (alpha != 1 && alpha != 2) throw ConfigError("config: alpha must be 1 or 2");
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("config: lambda must lie in [0, 1]");
  if (eta < 0.0) throw ConfigError("config: eta must be >= 0");
  if (sigma < 0.0 || sigma > 75.0) throw ConfigError("config: sigma must lie in [0, 75]");
  if (lr <= 0.0) throw ConfigError("config: lr must be positive");
  if (levels < 1 || levels > kMaxLevels) throw ConfigError("config: levels must be in [1, 6]");
  if (width_divisor < 1) throw ConfigError("config: width_divisor must be >= 1");
  if (log_every < 1) throw ConfigError("config: log_every must be >= 1");
}

void write_manifest(const std::filesystem::path& dir, const RunConfig& config,
                    const std::vector<std::string>& extra) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.txt", std::ios::trunc);
  if (!out) throw IoError("cannot write manifest in '" + dir.string() + "'");
  out << "# run manifest\n" << config.echo();
  for (const auto& line : extra) out << line << '\n';
}

}  // namespace ronet
