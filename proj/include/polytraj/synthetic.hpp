#pragma once

#include <string>
#include <vector>

#include "polytraj/dataset.hpp"
#include "polytraj/rng.hpp"

namespace polytraj::data {

enum class SyntheticKind { const_vel, const_acc, lane_change, arc };

SyntheticKind parse_synthetic_kind(const std::string& s);
std::string to_string(SyntheticKind kind);
/// "const_vel|const_acc|lane_change|arc"
std::string synthetic_kind_names();

/// Generator settings. Ranges are sampled uniformly per scene; set min == max
/// to pin a value. Times are seconds from the scene start.
struct SyntheticParams {
  double frame_rate = 10.0;
  int frames = 200;
  double speed_min = 10.0;  // m/s, within [0, 40]
  double speed_max = 30.0;
  double accel_max = 2.0;  // |a| <= accel_max <= 4 m/s^2
  double heading = 1.5707963267948966;  // direction of travel in the ground frame (rad)
  double heading_jitter = 0.0;          // per-scene heading drawn from heading +/- jitter (rad)
  int lanes = 3;
  double lane_width = 3.5;  // also the lateral lane-change offset
  double lane_change_center_min = 4.0;
  double lane_change_center_max = 8.0;
  double lane_change_duration_min = 3.0;
  double lane_change_duration_max = 5.0;
  double curvature_max = 0.01;  // 1/m
  double noise = 0.0;           // position noise stddev (m)
  int neighbors = 2;

  void validate() const;
};

/// Closed-form ego motion of one synthetic scene, relative to its start point.
struct EgoMotion {
  SyntheticKind kind = SyntheticKind::const_vel;
  Vec2 start;
  double heading = 0.0;
  double speed = 0.0;
  double accel = 0.0;
  double lateral_offset = 0.0;  // signed lane-change displacement
  double center = 0.0;          // lane-change midpoint (s)
  double width = 1.0;           // logistic time constant (s)
  double duration_total = 0.0;  // scene length (s), where the lateral offset is reached
  double curvature = 0.0;

  /// Noise-free position at time t (s).
  Vec2 position(double t) const;
  /// Signed displacement along the lateral (right-hand normal) axis at time t.
  double lateral(double t) const;
};

EgoMotion draw_motion(SyntheticKind kind, const SyntheticParams& params, Rng& rng);

/// Scenes whose ego follows a closed-form trajectory of the given kind, with
/// constant-velocity neighbours in adjacent lanes.
std::vector<Scene> gen_synthetic(SyntheticKind kind, const SyntheticParams& params, int n, Rng& rng);

/// Cycles through all four kinds; scene i uses kind i mod 4.
std::vector<Scene> gen_mixed(const SyntheticParams& params, int n, Rng& rng);

}  // namespace polytraj::data
