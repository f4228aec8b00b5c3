#include "polytraj/commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "polytraj/checkpoint.hpp"
#include "polytraj/errors.hpp"
#include "polytraj/metrics.hpp"
#include "polytraj/report.hpp"
#include "polytraj/studies.hpp"
#include "polytraj/synthetic.hpp"

namespace polytraj::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path out_dir(const RunConfig& c) { return c.get("run.out_dir"); }

fs::path cache_dir(const RunConfig& c) {
  const std::string& d = c.get("data.cache_dir");
  return d.empty() ? out_dir(c) : fs::path(d);
}

// Fails before any work when the directory cannot be created or written.
void ensure_writable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path probe = dir / ".polytraj-write-probe";
  {
    std::ofstream os(probe);
    if (ec || !os) throw DataError("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
}

std::vector<data::Track> scene_tracks(const data::Scene& scene) {
  std::vector<data::Track> tracks;
  for (const auto& a : scene.agents) {
    if (std::find(a.present.begin(), a.present.end(), 0) != a.present.end()) {
      throw DataError("scene '" + scene.id + "' has gaps and cannot be cached as tracks");
    }
    data::Track t;
    t.agent_id = a.agent_id;
    t.frame_rate = scene.frame_rate;
    t.first_frame = scene.first_frame;
    t.positions = a.positions;
    t.speed = a.speed;
    t.accel = a.accel;
    tracks.push_back(std::move(t));
  }
  return tracks;
}

json scene_entry(const data::Scene& s, const char* split) {
  json agents = json::array();
  for (const auto& a : s.agents) agents.push_back(a.agent_id);
  return {{"id", s.id}, {"split", split}, {"first_frame", s.first_frame}, {"frames", s.frames}, {"agents", agents}};
}

Dataset generate_synthetic(const RunConfig& c) {
  const auto params = synthetic_params(c);
  const int n = c.get_int("synthetic.n");
  if (n < 2) throw ConfigError("synthetic.n must be >= 2 to fill both splits");
  Rng rng(stream_seed(c, Stream::data));
  const std::string& kind = c.get("synthetic.kind");
  std::vector<data::Scene> scenes = kind == "mixed"
                                        ? data::gen_mixed(params, n, rng)
                                        : data::gen_synthetic(data::parse_synthetic_kind(kind), params, n, rng);
  const auto [a, b] = split_ratio(c);
  const auto parts = static_cast<std::size_t>(a + b);
  const std::size_t n_test = (scenes.size() * static_cast<std::size_t>(b) + parts - 1) / parts;
  Dataset ds;
  const auto cut = scenes.begin() + static_cast<std::ptrdiff_t>(scenes.size() - n_test);
  ds.train.assign(scenes.begin(), cut);
  ds.test.assign(cut, scenes.end());
  return ds;
}

Dataset generate_ngsim(const RunConfig& c, std::vector<data::Track>& tracks, std::size_t& dropped) {
  const std::string& path = c.get("data.path");
  if (path.empty()) throw ConfigError("data.source=ngsim needs data.path");
  if (!fs::exists(path)) throw DataError("NGSim file " + path + " does not exist");
  tracks = data::ingest_ngsim(fs::path(path), c.get_double("data.frame_rate"));
  const auto len = static_cast<std::size_t>(c.get_int("data.segment_len"));
  const auto history = static_cast<std::size_t>(c.get_int("data.history"));
  const auto neighbors = static_cast<std::size_t>(c.get_int("data.neighbors"));
  const auto [a, b] = split_ratio(c);
  const auto split = data::segment_and_split(tracks, len, a, b);
  Dataset ds;
  auto scenes = [&](const std::vector<data::Segment>& segs) {
    std::vector<data::Scene> out;
    for (const auto& s : segs) out.push_back(data::build_scene(tracks, s, len, neighbors, history));
    return out;
  };
  ds.train = scenes(split.train);
  ds.test = scenes(split.test);
  Rng rng(stream_seed(c, Stream::filter));
  const std::size_t before = ds.train.size();
  ds.train = data::filter_straight(std::move(ds.train), c.get_double("data.straight.fraction"),
                                   straight_criterion(c), rng);
  dropped = before - ds.train.size();
  return ds;
}

model::TrajectoryModel load_model(const fs::path& path, const RunConfig& c) {
  if (!fs::exists(path)) throw DataError("checkpoint " + path.string() + " does not exist");
  const auto ckpt = ad::load_checkpoint(path);
  const auto mc = model::ModelConfig::from_header(ckpt.header);
  const auto want = model::parse_head(c.get("model.head"));
  if (mc.head != want) {
    throw ConfigError("checkpoint head is " + model::to_string(mc.head) + " but model.head is " +
                      model::to_string(want));
  }
  model::TrajectoryModel m(mc, 0);
  ad::restore_parameters(m.parameters(), ckpt);
  return m;
}

std::vector<Sample> test_samples(const RunConfig& c) {
  const Dataset ds = read_dataset(cache_dir(c));
  auto test = make_samples(ds.test, c);
  if (test.empty()) throw DataError("test set is empty");
  return test;
}

void print_summary(std::ostream& log, const eval::StudyReport& r) {
  for (const auto& curve : r.curves) {
    std::ostringstream s;
    s.precision(4);
    s << std::fixed << curve.mean_ade();
    log << r.name << ' ' << curve.method << " mean_ade_m " << s.str() << " samples " << curve.samples;
    if (curve.skipped) log << " skipped " << curve.skipped;
    log << '\n';
  }
}

}  // namespace

void write_dataset(const fs::path& dir, const Dataset& ds, const RunConfig& c, std::size_t straight_dropped,
                   std::span<const data::Track> source) {
  std::vector<data::Track> tracks;
  if (source.empty()) {
    for (const auto* part : {&ds.train, &ds.test}) {
      for (const auto& s : *part) {
        auto t = scene_tracks(s);
        tracks.insert(tracks.end(), t.begin(), t.end());
      }
    }
  } else {
    // Neighbours are shared between scenes and may enter or leave mid-scene.
    std::set<std::int64_t> used;
    for (const auto* part : {&ds.train, &ds.test}) {
      for (const auto& s : *part) {
        for (const auto& a : s.agents) used.insert(a.agent_id);
      }
    }
    for (const auto& t : source) {
      if (used.contains(t.agent_id)) tracks.push_back(t);
    }
  }
  std::ostringstream csv;
  data::write_cache(csv, tracks);
  write_text(dir / "tracks.csv", csv.str());

  json scenes = json::array();
  for (const auto& s : ds.train) scenes.push_back(scene_entry(s, "train"));
  for (const auto& s : ds.test) scenes.push_back(scene_entry(s, "test"));
  json manifest = {{"seed", c.get_u64("run.seed")},
                   {"fingerprint", c.fingerprint()},
                   {"source", c.get("data.source")},
                   {"frame_rate", c.get_double("data.frame_rate")},
                   {"counts",
                    {{"scenes", ds.train.size() + ds.test.size()},
                     {"train", ds.train.size()},
                     {"test", ds.test.size()},
                     {"tracks", tracks.size()},
                     {"straight_dropped", straight_dropped}}},
                   {"scenes", scenes}};
  if (c.get("data.source") == "synthetic") manifest["kind"] = c.get("synthetic.kind");
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset read_dataset(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json", tpath = dir / "tracks.csv";
  if (!fs::exists(mpath) || !fs::exists(tpath)) {
    throw DataError("no dataset in " + dir.string() + " (run generate first)");
  }
  std::ifstream ms(mpath);
  json manifest;
  try {
    manifest = json::parse(ms);
  } catch (const json::exception& e) {
    throw DataError("manifest " + mpath.string() + ": " + e.what());
  }
  const double rate = manifest.value("frame_rate", 10.0);
  std::ifstream ts(tpath);
  const auto tracks = data::read_cache(ts, rate);
  std::map<std::int64_t, std::size_t> by_id;
  for (std::size_t i = 0; i < tracks.size(); ++i) by_id[tracks[i].agent_id] = i;

  Dataset ds;
  for (const auto& e : manifest.at("scenes")) {
    data::Scene s;
    s.id = e.at("id").get<std::string>();
    s.frame_rate = rate;
    s.first_frame = e.at("first_frame").get<std::int64_t>();
    s.frames = e.at("frames").get<std::size_t>();
    for (const auto& id : e.at("agents")) {
      auto it = by_id.find(id.get<std::int64_t>());
      if (it == by_id.end()) throw DataError("scene '" + s.id + "' names unknown agent " + id.dump());
      s.agents.push_back(data::window(tracks[it->second], s.first_frame, s.frames));
    }
    (e.at("split").get<std::string>() == "test" ? ds.test : ds.train).push_back(std::move(s));
  }
  return ds;
}

std::vector<Sample> make_samples(std::span<const data::Scene> scenes, const RunConfig& c) {
  const auto history = static_cast<std::size_t>(c.get_int("data.history"));
  std::vector<Sample> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back(data::make_sample(s, history));
  return out;
}

void cmd_generate(const RunConfig& c, std::ostream& log) {
  const fs::path dir = cache_dir(c);
  const std::string& source = c.get("data.source");
  if (source != "synthetic" && source != "ngsim") throw ConfigError("data.source must be synthetic|ngsim");
  if (source == "synthetic") {
    const std::string& kind = c.get("synthetic.kind");
    if (kind != "mixed") data::parse_synthetic_kind(kind);
    synthetic_params(c);
  }
  ensure_writable(dir);

  Dataset ds;
  std::size_t dropped = 0;
  if (source == "synthetic") {
    ds = generate_synthetic(c);
    write_dataset(dir, ds, c, 0);
  } else {
    std::vector<data::Track> tracks;
    ds = generate_ngsim(c, tracks, dropped);
    write_dataset(dir, ds, c, dropped, tracks);
  }
  log << "generated " << ds.train.size() + ds.test.size() << " scenes (train " << ds.train.size() << ", test "
      << ds.test.size() << ") in " << dir.string() << '\n';
}

void cmd_train(const RunConfig& c, std::ostream& log) {
  const auto mc = model_config(c);
  const auto opts = train_options(c);
  ScheduleSource schedules = schedule_source(c);
  if (mc.head == model::HeadKind::coordinates && schedules.mode != AnchorMode::fixed) {
    throw ConfigError("model.head=coordinates needs anchors.mode=fixed");
  }
  ensure_writable(out_dir(c));
  const Dataset ds = read_dataset(cache_dir(c));
  const auto samples = make_samples(ds.train, c);
  if (samples.empty()) throw DataError("training set is empty");

  model::TrajectoryModel m(mc, stream_seed(c, Stream::init));
  const auto result = model::train(m, samples, schedules, opts);

  auto header = mc.to_header();
  for (const auto& [k, v] : c.values()) {
    if (k.rfind("train.", 0) == 0) header[k] = v;
  }
  header["fingerprint"] = c.fingerprint();
  std::ostringstream ck;
  ad::write_checkpoint(ck, ad::make_checkpoint(m.parameters(), header));
  write_text(out_dir(c) / "model.ckpt", ck.str());

  std::ostringstream curve;
  curve << "step,loss\n";
  for (std::size_t i = 0; i < result.loss_curve.size(); ++i) {
    curve << i + 1 << ',' << ad::format_double(result.loss_curve[i]) << '\n';
  }
  write_text(out_dir(c) / "loss_curve.csv", curve.str());
  // Directory keys are left out so reruns elsewhere produce the same bytes.
  std::ostringstream cfg;
  for (const auto& [k, v] : c.values()) {
    if (k != "run.out_dir" && k != "data.cache_dir") cfg << k << " = " << v << '\n';
  }
  write_text(out_dir(c) / "run_config.txt", cfg.str());

  log << "trained " << result.steps << " steps on " << samples.size() << " samples\n";
  if (!result.loss_curve.empty()) log << "final loss " << ad::format_double(result.loss_curve.back()) << '\n';
  log << "fingerprint " << c.fingerprint() << '\n';
}

void cmd_eval(const RunConfig& c, const fs::path& checkpoint, std::ostream& log) {
  ensure_writable(out_dir(c));
  const auto m = load_model(checkpoint, c);
  const auto test = test_samples(c);
  const int horizon = m.config().horizon_frames;
  std::set<int> grid;
  for (int o : eval::even_offsets(horizon)) grid.insert(o);
  for (int o : c.get_int_list("eval.offsets")) {
    if (o < 1) throw ConfigError("eval.offsets must be positive");
    if (m.config().head == model::HeadKind::coordinates && o > horizon) {
      throw ConfigError("coordinate model cannot be evaluated past its horizon of " + std::to_string(horizon));
    }
    grid.insert(o);
  }
  const std::vector<int> offsets(grid.begin(), grid.end());
  auto report = eval::evaluate_positions(eval::predict_positions(m, test, offsets), test, offsets);
  report.method = model::to_string(m.config().head);
  report.fingerprint = c.fingerprint();

  eval::StudyReport sr{"eval", c.fingerprint(), {report}};
  const double rate = c.get_double("data.frame_rate");
  eval::write_report_files(out_dir(c), sr, rate);
  std::ostringstream table;
  const bool poly = m.config().head == model::HeadKind::polynomial;
  eval::print_rmse_table(table, poly ? nullptr : &report, poly ? &report : nullptr, rate);
  write_text(out_dir(c) / ("eval_" + c.fingerprint() + ".txt"), table.str());
  log << table.str();
  print_summary(log, sr);
  log << "fingerprint " << c.fingerprint() << '\n';
}

void cmd_study(const std::string& name, const RunConfig& c, std::ostream& log) {
  static const std::set<std::string> kStudies{"anchoring", "anchor_count", "extrapolation", "table1"};
  if (!kStudies.count(name)) {
    throw ConfigError("unknown study '" + name + "'; valid: anchoring|anchor_count|extrapolation|table1");
  }
  const auto settings = study_settings(c);
  ensure_writable(out_dir(c));
  const Dataset ds = read_dataset(cache_dir(c));
  const auto train = make_samples(ds.train, c);
  const auto test = make_samples(ds.test, c);
  if (train.empty() || test.empty()) throw DataError("study needs non-empty train and test sets");
  const double rate = c.get_double("data.frame_rate");

  eval::StudyReport report;
  if (name == "anchoring") {
    report = eval::run_anchoring_study(train, test, settings);
  } else if (name == "anchor_count") {
    report = eval::run_anchor_count_study(train, test, settings);
  } else if (name == "extrapolation") {
    report = eval::run_extrapolation_study(train, test, settings);
  } else {
    auto coord_cfg = settings.model;
    coord_cfg.head = model::HeadKind::coordinates;
    ScheduleSource fixed{AnchorMode::fixed, coord_cfg.anchor_count, coord_cfg.horizon_frames, settings.dist};
    const auto coords = eval::train_variant(settings, coord_cfg, fixed, train, 0);
    auto poly_cfg = settings.model;
    poly_cfg.head = model::HeadKind::polynomial;
    const auto poly = eval::train_variant(settings, poly_cfg, schedule_source(c), train, 1);
    const auto offsets = c.get_int_list("eval.offsets");
    auto rc = eval::rmse_at_offsets(coords, test, offsets);
    auto rp = eval::rmse_at_offsets(poly, test, offsets);
    rc.method = "coords";
    rp.method = "poly";
    report = {"table1", "", {rc, rp}};
    std::ostringstream table;
    eval::print_rmse_table(table, &rc, &rp, rate);
    write_text(out_dir(c) / ("table1_" + c.fingerprint() + ".txt"), table.str());
    log << table.str();
  }
  report.fingerprint = c.fingerprint();
  for (auto& curve : report.curves) curve.fingerprint = report.fingerprint;
  const auto path = eval::write_report_files(out_dir(c), report, rate);
  print_summary(log, report);
  log << "wrote " << path.string() << '\n';
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::ostringstream keys;
  keys << "Config keys (default):\n";
  for (const auto& k : config_keys()) {
    keys << "  " << k.name << " = " << (*k.default_value ? k.default_value : "\"\"") << "    " << k.description
         << '\n';
  }
  CLI::App app{"Polynomial trajectory prediction: generate data, train, evaluate, run studies.", "polytraj"};
  app.footer(keys.str());
  app.require_subcommand(1, 1);

  std::string config_file;
  std::vector<std::string> sets;
  std::string checkpoint;
  std::string study_name;
  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_file, "config file of key = value lines");
    sub->add_option("--set", sets, "override, key=value (repeatable; wins over the file)")->allow_extra_args(false);
    sub->footer(keys.str());
  };
  auto* gen = app.add_subcommand("generate", "write a synthetic or NGSim dataset cache");
  auto* tr = app.add_subcommand("train", "train a model, write checkpoint and loss curve");
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  auto* st = app.add_subcommand("study", "train and compare models for one study");
  for (auto* s : {gen, tr, ev, st}) common(s);
  ev->add_option("--checkpoint", checkpoint, "checkpoint path (default <run.out_dir>/model.ckpt)");
  st->add_option("name", study_name, "anchoring | anchor_count | extrapolation | table1")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    RunConfig config;
    if (!config_file.empty()) config.merge_file(fs::path(config_file));
    for (const auto& s : sets) config.set_assignment(s);
    if (*gen) {
      cmd_generate(config, out);
    } else if (*tr) {
      cmd_train(config, out);
    } else if (*ev) {
      cmd_eval(config, checkpoint.empty() ? out_dir(config) / "model.ckpt" : fs::path(checkpoint), out);
    } else {
      cmd_study(study_name, config, out);
    }
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}

}  // namespace polytraj::cli
