#include "polytraj/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "polytraj/checkpoint.hpp"
#include "polytraj/errors.hpp"

namespace polytraj::data {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const char* column, std::size_t line_no) {
  std::size_t b = s.find_first_not_of(" \t\"");
  std::size_t e = s.find_last_not_of(" \t\"");
  if (b == std::string::npos) {
    throw DataError("line " + std::to_string(line_no) + ": empty value in column " + column);
  }
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data() + b, s.data() + e + 1, v);
  if (ec != std::errc() || ptr != s.data() + e + 1 || !std::isfinite(v)) {
    throw DataError("line " + std::to_string(line_no) + ": bad number '" + s + "' in column " + column);
  }
  return v;
}

std::int64_t parse_integer(const std::string& s, const char* column, std::size_t line_no) {
  const double v = parse_number(s, column, line_no);
  if (v != std::floor(v)) throw DataError("line " + std::to_string(line_no) + ": non-integer " + column);
  return static_cast<std::int64_t>(v);
}

struct Row {
  std::int64_t frame;
  Vec2 pos;
  std::optional<double> v, a;
};

std::vector<Track> assemble_tracks(std::map<std::int64_t, std::vector<Row>>& by_agent, double frame_rate) {
  std::vector<Track> tracks;
  for (auto& [id, rows] : by_agent) {
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.frame < b.frame; });
    Track t;
    t.agent_id = id;
    t.frame_rate = frame_rate;
    t.first_frame = rows.front().frame;
    const bool has_v = std::all_of(rows.begin(), rows.end(), [](const Row& r) { return r.v.has_value(); });
    const bool has_a = std::all_of(rows.begin(), rows.end(), [](const Row& r) { return r.a.has_value(); });
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i > 0 && rows[i].frame <= rows[i - 1].frame) {
        throw DataError("non-monotone frames for vehicle " + std::to_string(id) + ": frame " +
                        std::to_string(rows[i].frame) + " repeats");
      }
      if (i > 0 && rows[i].frame != rows[i - 1].frame + 1) {
        throw DataError("non-uniform frame spacing for vehicle " + std::to_string(id) + " after frame " +
                        std::to_string(rows[i - 1].frame));
      }
      t.positions.push_back(rows[i].pos);
      if (has_v) t.speed.push_back(*rows[i].v);
      if (has_a) t.accel.push_back(*rows[i].a);
    }
    if (t.positions.size() < 2) continue;  // a track needs at least one increment
    tracks.push_back(std::move(t));
  }
  return tracks;
}

double wrap_angle(double a) { return a <= -std::numbers::pi ? a + 2.0 * std::numbers::pi : a; }

}  // namespace

std::vector<Track> ingest_ngsim(std::istream& is, double frame_rate) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("NGSim CSV is empty");
  const auto header = split_csv_line(line);
  auto column = [&](const char* name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      std::string h = header[i];
      h.erase(std::remove_if(h.begin(), h.end(), [](char c) { return c == '"' || c == ' '; }), h.end());
      if (h == name) return i;
    }
    throw DataError(std::string("NGSim CSV missing column ") + name);
  };
  const std::size_t c_id = column("Vehicle_ID"), c_frame = column("Frame_ID"), c_x = column("Local_X"),
                    c_y = column("Local_Y"), c_v = column("v_Vel"), c_a = column("v_Acc");
  const std::size_t needed = std::max({c_id, c_frame, c_x, c_y, c_v, c_a});

  std::map<std::int64_t, std::vector<Row>> by_agent;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() <= needed) throw DataError("line " + std::to_string(line_no) + ": too few columns");
    Row r;
    r.frame = parse_integer(cells[c_frame], "Frame_ID", line_no);
    r.pos = {parse_number(cells[c_x], "Local_X", line_no) * kFeetToMetres,
             parse_number(cells[c_y], "Local_Y", line_no) * kFeetToMetres};
    r.v = parse_number(cells[c_v], "v_Vel", line_no) * kFeetToMetres;
    r.a = parse_number(cells[c_a], "v_Acc", line_no) * kFeetToMetres;
    by_agent[parse_integer(cells[c_id], "Vehicle_ID", line_no)].push_back(r);
  }
  return assemble_tracks(by_agent, frame_rate);
}

std::vector<Track> ingest_ngsim(const std::filesystem::path& path, double frame_rate) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open NGSim CSV " + path.string());
  return ingest_ngsim(is, frame_rate);
}

void write_cache(std::ostream& os, std::span<const Track> tracks) {
  os << "agent_id,frame,x_m,y_m,v,a\n";
  for (const auto& t : tracks) {
    for (std::size_t i = 0; i < t.positions.size(); ++i) {
      os << t.agent_id << ',' << t.first_frame + static_cast<std::int64_t>(i) << ','
         << ad::format_double(t.positions[i].x) << ',' << ad::format_double(t.positions[i].y) << ','
         << (t.speed.empty() ? "" : ad::format_double(t.speed[i])) << ','
         << (t.accel.empty() ? "" : ad::format_double(t.accel[i])) << '\n';
    }
  }
}

std::vector<Track> read_cache(std::istream& is, double frame_rate) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("dataset cache is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "agent_id,frame,x_m,y_m,v,a") throw DataError("dataset cache has unexpected header '" + line + "'");
  std::map<std::int64_t, std::vector<Row>> by_agent;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != 6) throw DataError("line " + std::to_string(line_no) + ": expected 6 columns");
    Row r;
    r.frame = parse_integer(cells[1], "frame", line_no);
    r.pos = {parse_number(cells[2], "x_m", line_no), parse_number(cells[3], "y_m", line_no)};
    if (!cells[4].empty()) r.v = parse_number(cells[4], "v", line_no);
    if (!cells[5].empty()) r.a = parse_number(cells[5], "a", line_no);
    by_agent[parse_integer(cells[0], "agent_id", line_no)].push_back(r);
  }
  return assemble_tracks(by_agent, frame_rate);
}

std::vector<std::optional<AgentState>> compute_states(const Scene& scene, std::size_t t) {
  if (t < 1 || t >= scene.frames) {
    throw std::out_of_range("compute_states: frame " + std::to_string(t) + " needs a predecessor inside the scene");
  }
  const double rate = scene.frame_rate;
  const SceneAgent& ego = scene.agents.at(0);
  auto observed = [](const SceneAgent& a, std::size_t f) { return a.present[f] != 0; };
  auto speed_at = [&](const SceneAgent& a, std::size_t f) {
    if (!a.speed.empty()) return a.speed[f];
    return (a.positions[f] - a.positions[f - 1]).norm() * rate;
  };

  std::vector<std::optional<AgentState>> out;
  out.reserve(scene.agents.size());
  for (const auto& agent : scene.agents) {
    if (!observed(agent, t) || !observed(agent, t - 1)) {
      out.emplace_back();
      continue;
    }
    AgentState s;
    const Vec2 d = agent.positions[t] - agent.positions[t - 1];
    s.dx = d.x;
    s.dy = d.y;
    s.v = speed_at(agent, t);
    if (!agent.accel.empty()) {
      s.alpha = agent.accel[t];
    } else if (t >= 2 && observed(agent, t - 2)) {
      s.alpha = (s.v - speed_at(agent, t - 1)) * rate;
    }
    s.theta = (d.x == 0.0 && d.y == 0.0) ? 0.0 : wrap_angle(std::atan2(d.y, d.x));
    if (observed(ego, t)) {
      const Vec2 rel = agent.positions[t] - ego.positions[t];
      s.l = rel.norm();
      s.phi = s.l == 0.0 ? 0.0 : wrap_angle(std::atan2(rel.y, rel.x));
    }
    out.push_back(s);
  }
  return out;
}

SplitResult segment_and_split(std::span<const Track> tracks, std::size_t segment_len, int train_parts,
                              int test_parts) {
  if (segment_len < 2) throw std::invalid_argument("segment length must be >= 2");
  if (train_parts < 0 || test_parts < 0 || train_parts + test_parts == 0) {
    throw std::invalid_argument("split ratio parts must be non-negative and not both zero");
  }
  SplitResult result;
  std::vector<Segment> all;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const std::size_t n = tracks[i].length() / segment_len;
    if (n == 0) ++result.skipped_tracks;
    for (std::size_t k = 0; k < n; ++k) {
      all.push_back({i, tracks[i].first_frame + static_cast<std::int64_t>(k * segment_len)});
    }
  }
  std::stable_sort(all.begin(), all.end(), [&](const Segment& a, const Segment& b) {
    if (a.first_frame != b.first_frame) return a.first_frame < b.first_frame;
    return tracks[a.track].agent_id < tracks[b.track].agent_id;
  });
  const auto parts = static_cast<std::size_t>(train_parts + test_parts);
  const std::size_t n_test = (all.size() * static_cast<std::size_t>(test_parts) + parts - 1) / parts;
  const std::size_t n_train = all.size() - n_test;
  result.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  result.test.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end());
  return result;
}

SceneAgent window(const Track& track, std::int64_t first, std::size_t len) {
  SceneAgent a;
  a.agent_id = track.agent_id;
  a.positions.assign(len, Vec2{});
  a.present.assign(len, 0);
  const bool has_v = !track.speed.empty(), has_a = !track.accel.empty();
  if (has_v) a.speed.assign(len, 0.0);
  if (has_a) a.accel.assign(len, 0.0);
  for (std::size_t f = 0; f < len; ++f) {
    const std::int64_t idx = first + static_cast<std::int64_t>(f) - track.first_frame;
    if (idx < 0 || idx >= static_cast<std::int64_t>(track.length())) continue;
    const auto i = static_cast<std::size_t>(idx);
    a.positions[f] = track.positions[i];
    a.present[f] = 1;
    if (has_v) a.speed[f] = track.speed[i];
    if (has_a) a.accel[f] = track.accel[i];
  }
  return a;
}

Scene build_scene(std::span<const Track> tracks, const Segment& segment, std::size_t segment_len,
                  std::size_t neighbors, std::size_t t0) {
  const Track& ego = tracks[segment.track];
  if (t0 >= segment_len) throw std::out_of_range("build_scene: t0 outside segment");
  Scene scene;
  scene.id = std::to_string(ego.agent_id) + "@" + std::to_string(segment.first_frame);
  scene.frame_rate = ego.frame_rate;
  scene.first_frame = segment.first_frame;
  scene.frames = segment_len;
  scene.agents.push_back(window(ego, segment.first_frame, segment_len));

  const std::int64_t frame0 = segment.first_frame + static_cast<std::int64_t>(t0);
  const Vec2 ego_at_t0 = ego.positions[static_cast<std::size_t>(frame0 - ego.first_frame)];
  std::vector<std::pair<double, std::size_t>> candidates;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (i == segment.track || frame0 < tracks[i].first_frame || frame0 >= tracks[i].end_frame()) continue;
    const Vec2 p = tracks[i].positions[static_cast<std::size_t>(frame0 - tracks[i].first_frame)];
    candidates.emplace_back(distance(p, ego_at_t0), i);
  }
  const std::size_t keep = std::min(neighbors, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end());
  for (std::size_t k = 0; k < keep; ++k) {
    scene.agents.push_back(window(tracks[candidates[k].second], segment.first_frame, segment_len));
  }
  return scene;
}

bool is_straight(const Scene& scene, const StraightCriterion& criterion) {
  const SceneAgent& ego = scene.agents.at(0);
  double lo = 0.0, hi = 0.0;
  bool first = true;
  std::vector<double> speeds;
  for (std::size_t f = 0; f < scene.frames; ++f) {
    if (!ego.present[f]) continue;
    const double x = ego.positions[f].x;
    lo = first ? x : std::min(lo, x);
    hi = first ? x : std::max(hi, x);
    first = false;
    if (!ego.speed.empty()) {
      speeds.push_back(ego.speed[f]);
    } else if (f >= 1 && ego.present[f - 1]) {
      speeds.push_back((ego.positions[f] - ego.positions[f - 1]).norm() * scene.frame_rate);
    }
  }
  if (speeds.empty()) return false;
  double mean = 0.0;
  for (double s : speeds) mean += s;
  mean /= static_cast<double>(speeds.size());
  double var = 0.0;
  for (double s : speeds) var += (s - mean) * (s - mean);
  var /= static_cast<double>(speeds.size());
  return (hi - lo) < criterion.lateral_range && std::sqrt(var) < criterion.speed_std;
}

std::vector<Scene> filter_straight(std::vector<Scene> scenes, double fraction, const StraightCriterion& criterion,
                                   Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::invalid_argument("straight fraction must be in [0,1]");
  std::vector<std::size_t> straight;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (is_straight(scenes[i], criterion)) straight.push_back(i);
  }
  const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(straight.size())));
  std::shuffle(straight.begin(), straight.end(), rng.engine());
  std::vector<std::uint8_t> drop(scenes.size(), 0);
  for (std::size_t k = keep; k < straight.size(); ++k) drop[straight[k]] = 1;
  std::vector<Scene> out;
  out.reserve(scenes.size() - (straight.size() - keep));
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (!drop[i]) out.push_back(std::move(scenes[i]));
  }
  return out;
}

Sample make_sample(const Scene& scene, std::size_t history) {
  if (history < 1 || history >= scene.frames) {
    throw std::invalid_argument("scene '" + scene.id + "' of " + std::to_string(scene.frames) +
                                " frames cannot hold a history of " + std::to_string(history));
  }
  const SceneAgent& ego = scene.agents.at(0);
  const std::size_t t0 = history;
  if (!ego.present[t0]) throw DataError("scene '" + scene.id + "': ego absent at t0");
  Sample s;
  s.id = scene.id;
  s.agents.resize(scene.agents.size());
  for (auto& a : s.agents) {
    a.states.assign(history, AgentState{});
    a.present.assign(history, 0);
  }
  for (std::size_t f = 1; f <= history; ++f) {
    const auto states = compute_states(scene, f);
    for (std::size_t a = 0; a < states.size(); ++a) {
      if (states[a]) {
        s.agents[a].states[f - 1] = *states[a];
        s.agents[a].present[f - 1] = 1;
      }
    }
  }
  const Vec2 origin = ego.positions[t0];
  for (std::size_t f = t0; f < scene.frames && ego.present[f]; ++f) s.future.push_back(ego.positions[f] - origin);
  return s;
}

}  // namespace polytraj::data
