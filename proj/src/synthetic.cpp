#include "polytraj/synthetic.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace polytraj::data {

namespace {
constexpr std::array<SyntheticKind, 4> kKinds{SyntheticKind::const_vel, SyntheticKind::const_acc,
                                              SyntheticKind::lane_change, SyntheticKind::arc};

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }
}  // namespace

SyntheticKind parse_synthetic_kind(const std::string& s) {
  for (auto k : kKinds) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("invalid synthetic kind '" + s + "'; valid kinds: " + synthetic_kind_names());
}

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::const_vel: return "const_vel";
    case SyntheticKind::const_acc: return "const_acc";
    case SyntheticKind::lane_change: return "lane_change";
    case SyntheticKind::arc: return "arc";
  }
  return "?";
}

std::string synthetic_kind_names() { return "const_vel|const_acc|lane_change|arc"; }

void SyntheticParams::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("synthetic: " + m); };
  if (!(frame_rate > 0.0)) fail("frame_rate must be > 0");
  if (frames < 2) fail("frames must be >= 2");
  if (speed_min < 0.0 || speed_max > 40.0 || speed_min > speed_max) fail("speeds must satisfy 0 <= min <= max <= 40");
  if (accel_max < 0.0 || accel_max > 4.0) fail("accel_max must be in [0, 4]");
  if (lanes < 1) fail("lanes must be >= 1");
  if (lane_change_center_min > lane_change_center_max) fail("lane change center range inverted");
  if (!(lane_change_duration_min > 0.0) || lane_change_duration_min > lane_change_duration_max) {
    fail("lane change durations must satisfy 0 < min <= max");
  }
  if (curvature_max < 0.0) fail("curvature_max must be >= 0");
  if (noise < 0.0) fail("noise must be >= 0");
  if (heading_jitter < 0.0) fail("heading_jitter must be >= 0");
  if (neighbors < 0) fail("neighbors must be >= 0");
}

double EgoMotion::lateral(double t) const {
  if (kind != SyntheticKind::lane_change) return 0.0;
  // Logistic profile rescaled to be exactly 0 at the start and the full offset at the end.
  const double lo = logistic((0.0 - center) / width);
  const double hi = logistic((duration_total - center) / width);
  return lateral_offset * (logistic((t - center) / width) - lo) / (hi - lo);
}

Vec2 EgoMotion::position(double t) const {
  const Vec2 along{std::cos(heading), std::sin(heading)};
  const Vec2 normal{std::sin(heading), -std::cos(heading)};
  if (kind == SyntheticKind::arc && curvature != 0.0) {
    const double s = speed * t;
    const double h1 = heading + curvature * s;
    return start + Vec2{(std::sin(h1) - std::sin(heading)) / curvature, -(std::cos(h1) - std::cos(heading)) / curvature};
  }
  const double s = speed * t + 0.5 * accel * t * t;
  return start + s * along + lateral(t) * normal;
}

EgoMotion draw_motion(SyntheticKind kind, const SyntheticParams& p, Rng& rng) {
  EgoMotion m;
  m.kind = kind;
  m.heading = p.heading;
  if (p.heading_jitter > 0.0) m.heading += rng.uniform(-p.heading_jitter, p.heading_jitter);
  const int lane = rng.uniform_int(0, p.lanes - 1);
  m.start = (lane * p.lane_width) * Vec2{std::sin(p.heading), -std::cos(p.heading)};
  m.speed = rng.uniform(p.speed_min, p.speed_max);
  m.duration_total = (p.frames - 1) / p.frame_rate;
  switch (kind) {
    case SyntheticKind::const_vel:
      break;
    case SyntheticKind::const_acc:
      m.accel = rng.uniform(-p.accel_max, p.accel_max);
      // never reverse within the scene
      if (m.speed + m.accel * m.duration_total < 0.0) m.accel = -m.accel;
      break;
    case SyntheticKind::lane_change: {
      // Change towards the free side when at the edge lanes.
      int dir = rng.uniform_int(0, 1) ? 1 : -1;
      if (lane == 0) dir = 1;
      if (lane == p.lanes - 1 && p.lanes > 1) dir = -1;
      m.lateral_offset = dir * p.lane_width;
      m.center = rng.uniform(p.lane_change_center_min, p.lane_change_center_max);
      // ~98% of the logistic swing happens within +/- 4 time constants
      m.width = rng.uniform(p.lane_change_duration_min, p.lane_change_duration_max) / 8.0;
      break;
    }
    case SyntheticKind::arc:
      m.curvature = rng.uniform(-p.curvature_max, p.curvature_max);
      break;
  }
  return m;
}

std::vector<Scene> gen_synthetic(SyntheticKind kind, const SyntheticParams& params, int n, Rng& rng) {
  params.validate();
  std::vector<Scene> scenes;
  const auto frames = static_cast<std::size_t>(params.frames);
  for (int i = 0; i < n; ++i) {
    const EgoMotion ego = draw_motion(kind, params, rng);
    Scene scene;
    scene.id = to_string(kind) + "-" + std::to_string(i);
    scene.frame_rate = params.frame_rate;
    scene.frames = frames;

    SceneAgent e;
    e.agent_id = static_cast<std::int64_t>(i) * 100;
    for (std::size_t f = 0; f < frames; ++f) e.positions.push_back(ego.position(f / params.frame_rate));
    scene.agents.push_back(std::move(e));

    const Vec2 along{std::cos(params.heading), std::sin(params.heading)};
    const Vec2 normal{std::sin(params.heading), -std::cos(params.heading)};
    for (int k = 0; k < params.neighbors; ++k) {
      const double lane_shift = params.lane_width * rng.uniform_int(-1, 1);
      const double gap = rng.uniform(10.0, 40.0) * (rng.uniform_int(0, 1) ? 1.0 : -1.0);
      const double speed = rng.uniform(params.speed_min, params.speed_max);
      const Vec2 start = ego.start + gap * along + lane_shift * normal;
      SceneAgent a;
      a.agent_id = static_cast<std::int64_t>(i) * 100 + k + 1;
      for (std::size_t f = 0; f < frames; ++f) a.positions.push_back(start + (speed * f / params.frame_rate) * along);
      scene.agents.push_back(std::move(a));
    }
    for (auto& a : scene.agents) {
      a.present.assign(frames, 1);
      if (params.noise > 0.0) {
        for (auto& p : a.positions) p = p + Vec2{rng.normal(0.0, params.noise), rng.normal(0.0, params.noise)};
      }
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

std::vector<Scene> gen_mixed(const SyntheticParams& params, int n, Rng& rng) {
  std::vector<Scene> scenes;
  for (int i = 0; i < n; ++i) {
    auto one = gen_synthetic(kKinds[static_cast<std::size_t>(i) % kKinds.size()], params, 1, rng);
    one.front().id = "mixed-" + std::to_string(i) + "-" + to_string(kKinds[static_cast<std::size_t>(i) % 4]);
    for (auto& a : one.front().agents) a.agent_id += static_cast<std::int64_t>(i) * 100;
    scenes.push_back(std::move(one.front()));
  }
  return scenes;
}

}  // namespace polytraj::data
