#include "polytraj/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "polytraj/errors.hpp"
#include "polytraj/rng.hpp"

namespace polytraj::cli {

namespace {

// Sorted by name so that --help and fingerprints are stable.
constexpr std::array kKeys{
    KeySpec{"anchors.count", "5", "anchor points per trajectory (T)"},
    KeySpec{"anchors.max", "55", "upper bound of the random last-anchor offset (frames)"},
    KeySpec{"anchors.min", "35", "lower bound of the random last-anchor offset (frames)"},
    KeySpec{"anchors.mode", "random", "fixed | random"},
    KeySpec{"data.cache_dir", "", "dataset directory written by generate; empty means run.out_dir"},
    KeySpec{"data.frame_rate", "10", "frames per second"},
    KeySpec{"data.history", "50", "observed frames before t0"},
    KeySpec{"data.neighbors", "8", "neighbouring agents per NGSim scene"},
    KeySpec{"data.path", "", "NGSim CSV (data.source=ngsim)"},
    KeySpec{"data.segment_len", "200", "frames per NGSim segment"},
    KeySpec{"data.source", "synthetic", "synthetic | ngsim"},
    KeySpec{"data.split_ratio", "3:1", "train:test ratio of the temporal split"},
    KeySpec{"data.straight.fraction", "0.5", "fraction of straight constant-velocity NGSim segments kept"},
    KeySpec{"data.straight.lateral_range", "0.5", "straight if lateral range below this (m)"},
    KeySpec{"data.straight.speed_std", "0.5", "straight if speed std below this (m/s)"},
    KeySpec{"eval.offsets", "10,20,30,40,50", "RMSE table offsets (frames)"},
    KeySpec{"horizon_frames", "50", "prediction horizon (frames)"},
    KeySpec{"model.d_x", "3", "lateral polynomial degree"},
    KeySpec{"model.d_y", "3", "longitudinal polynomial degree"},
    KeySpec{"model.decoder_layers", "3", "decoder GRU layers"},
    KeySpec{"model.decoder_steps", "5", "decoder recurrence steps"},
    KeySpec{"model.encoder_layers", "2", "encoder GRU layers"},
    KeySpec{"model.head", "polynomial", "polynomial | coordinates"},
    KeySpec{"model.lateral_scale", "5", "lateral output scale (m)"},
    KeySpec{"model.longitudinal_scale", "50", "longitudinal output scale (m)"},
    KeySpec{"model.units", "32", "hidden units per layer"},
    KeySpec{"run.out_dir", "out", "output directory"},
    KeySpec{"run.seed", "1", "root seed of every random stream"},
    KeySpec{"synthetic.accel_max", "2", "max |acceleration| (m/s^2, <= 4)"},
    KeySpec{"synthetic.curvature_max", "0.01", "max |curvature| of arcs (1/m)"},
    KeySpec{"synthetic.frames", "200", "frames per scene"},
    KeySpec{"synthetic.heading", "1.5707963267948966", "direction of travel (rad)"},
    KeySpec{"synthetic.heading_jitter", "0", "per-scene heading spread, uniform +/- (rad)"},
    KeySpec{"synthetic.kind", "const_vel", "const_vel | const_acc | lane_change | arc | mixed"},
    KeySpec{"synthetic.lane_change.center_max", "8", "latest lane-change midpoint (s)"},
    KeySpec{"synthetic.lane_change.center_min", "4", "earliest lane-change midpoint (s)"},
    KeySpec{"synthetic.lane_change.duration_max", "5", "longest lane change (s)"},
    KeySpec{"synthetic.lane_change.duration_min", "3", "shortest lane change (s)"},
    KeySpec{"synthetic.lane_width", "3.5", "lane width and lane-change offset (m)"},
    KeySpec{"synthetic.lanes", "3", "number of lanes"},
    KeySpec{"synthetic.n", "200", "scenes to generate"},
    KeySpec{"synthetic.neighbors", "2", "neighbouring agents per scene"},
    KeySpec{"synthetic.noise", "0", "position noise std (m)"},
    KeySpec{"synthetic.speed_max", "30", "max speed (m/s, <= 40)"},
    KeySpec{"synthetic.speed_min", "10", "min speed (m/s)"},
    KeySpec{"train.batch", "32", "minibatch size"},
    KeySpec{"train.epochs", "10", "passes over the training set"},
    KeySpec{"train.grad_clip", "1", "elementwise gradient clip (0 disables)"},
    KeySpec{"train.lr", "0.003", "learning rate"},
    KeySpec{"train.lr_final_ratio", "0.01", "cosine decay floor as a fraction of train.lr"},
    KeySpec{"train.optimizer", "adam", "adam | sgd"},
    KeySpec{"train.seed", "auto", "training stream seed; auto derives it from run.seed"},
    KeySpec{"train.steps", "0", "optimizer steps; > 0 overrides train.epochs"},
    KeySpec{"train.warmup", "0", "steps of linear learning-rate warmup"},
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || p != end || text.empty()) {
    throw ConfigError("config key " + key + ": cannot parse '" + text + "' as a number");
  }
  return v;
}

}  // namespace

std::span<const KeySpec> config_keys() { return kKeys; }

RunConfig::RunConfig() {
  for (const auto& k : kKeys) values_.emplace(k.name, k.default_value);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::merge_file(std::istream& is, const std::string& origin) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      set_assignment(line);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  merge_file(is, path.string());
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

int RunConfig::get_int(const std::string& key) const { return parse_number<int>(key, get(key)); }
long RunConfig::get_long(const std::string& key) const { return parse_number<long>(key, get(key)); }
std::uint64_t RunConfig::get_u64(const std::string& key) const { return parse_number<std::uint64_t>(key, get(key)); }
double RunConfig::get_double(const std::string& key) const { return parse_number<double>(key, get(key)); }

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
  std::vector<int> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
  if (out.empty()) throw ConfigError("config key " + key + " is empty");
  return out;
}

std::string RunConfig::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [k, v] : values_) {
    if (k == "run.out_dir" || k == "data.cache_dir") continue;
    for (char ch : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

void RunConfig::write(std::ostream& os) const {
  for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
}

model::ModelConfig model_config(const RunConfig& c) {
  model::ModelConfig m;
  m.encoder_layers = c.get_int("model.encoder_layers");
  m.decoder_layers = c.get_int("model.decoder_layers");
  m.units = c.get_int("model.units");
  m.head = model::parse_head(c.get("model.head"));
  m.d_x = c.get_int("model.d_x");
  m.d_y = c.get_int("model.d_y");
  m.horizon_frames = c.get_int("horizon_frames");
  m.decoder_steps = c.get_int("model.decoder_steps");
  m.anchor_count = c.get_int("anchors.count");
  m.lateral_scale = c.get_double("model.lateral_scale");
  m.longitudinal_scale = c.get_double("model.longitudinal_scale");
  m.validate();
  return m;
}

std::uint64_t stream_seed(const RunConfig& c, Stream s) {
  if (s == Stream::train && c.get("train.seed") != "auto") return c.get_u64("train.seed");
  return Rng(c.get_u64("run.seed")).split(static_cast<std::uint64_t>(s)).seed();
}

model::TrainOptions train_options(const RunConfig& c) {
  model::TrainOptions t;
  t.optimizer = c.get("train.optimizer");
  t.lr = c.get_double("train.lr");
  t.lr_final_ratio = c.get_double("train.lr_final_ratio");
  t.grad_clip = c.get_double("train.grad_clip");
  t.epochs = c.get_int("train.epochs");
  t.batch = c.get_int("train.batch");
  t.steps = c.get_long("train.steps");
  t.warmup_steps = c.get_long("train.warmup");
  t.seed = stream_seed(c, Stream::train);
  t.validate();
  return t;
}

ScheduleSource schedule_source(const RunConfig& c) {
  ScheduleSource s;
  s.mode = parse_anchor_mode(c.get("anchors.mode"));
  s.count = c.get_int("anchors.count");
  s.horizon = c.get_int("horizon_frames");
  s.dist.min = c.get_int("anchors.min");
  s.dist.max = c.get_int("anchors.max");
  s.validate();
  return s;
}

data::SyntheticParams synthetic_params(const RunConfig& c) {
  data::SyntheticParams p;
  p.frame_rate = c.get_double("data.frame_rate");
  p.frames = c.get_int("synthetic.frames");
  p.speed_min = c.get_double("synthetic.speed_min");
  p.speed_max = c.get_double("synthetic.speed_max");
  p.accel_max = c.get_double("synthetic.accel_max");
  p.heading = c.get_double("synthetic.heading");
  p.heading_jitter = c.get_double("synthetic.heading_jitter");
  p.lanes = c.get_int("synthetic.lanes");
  p.lane_width = c.get_double("synthetic.lane_width");
  p.lane_change_center_min = c.get_double("synthetic.lane_change.center_min");
  p.lane_change_center_max = c.get_double("synthetic.lane_change.center_max");
  p.lane_change_duration_min = c.get_double("synthetic.lane_change.duration_min");
  p.lane_change_duration_max = c.get_double("synthetic.lane_change.duration_max");
  p.curvature_max = c.get_double("synthetic.curvature_max");
  p.noise = c.get_double("synthetic.noise");
  p.neighbors = c.get_int("synthetic.neighbors");
  p.validate();
  return p;
}

data::StraightCriterion straight_criterion(const RunConfig& c) {
  return {c.get_double("data.straight.lateral_range"), c.get_double("data.straight.speed_std")};
}

std::pair<int, int> split_ratio(const RunConfig& c) {
  const std::string& s = c.get("data.split_ratio");
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ConfigError("data.split_ratio must look like train:test, got '" + s + "'");
  const int a = parse_number<int>("data.split_ratio", trim(s.substr(0, colon)));
  const int b = parse_number<int>("data.split_ratio", trim(s.substr(colon + 1)));
  if (a <= 0 || b <= 0) throw ConfigError("data.split_ratio parts must be positive");
  return {a, b};
}

eval::StudySettings study_settings(const RunConfig& c) {
  eval::StudySettings s;
  s.model = model_config(c);
  s.train = train_options(c);
  s.dist.min = c.get_int("anchors.min");
  s.dist.max = c.get_int("anchors.max");
  s.seed = stream_seed(c, Stream::study);
  return s;
}

}  // namespace polytraj::cli
