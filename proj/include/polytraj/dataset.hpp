#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polytraj/rng.hpp"
#include "polytraj/sample.hpp"
#include "polytraj/types.hpp"

namespace polytraj::data {

inline constexpr double kFeetToMetres = 0.3048;

/// Fixed-rate positions of one agent in a ground frame (x lateral, y longitudinal).
struct Track {
  std::int64_t agent_id = 0;
  double frame_rate = 10.0;
  std::int64_t first_frame = 0;
  std::vector<Vec2> positions;
  std::vector<double> speed;  // m/s, empty when not recorded
  std::vector<double> accel;  // m/s^2, empty when not recorded

  std::size_t length() const { return positions.size(); }
  std::int64_t end_frame() const { return first_frame + static_cast<std::int64_t>(positions.size()); }
};

/// Reads the NGSim trajectory table. Needs Vehicle_ID, Frame_ID, Local_X,
/// Local_Y, v_Vel, v_Acc; other columns are ignored. Feet become metres.
std::vector<Track> ingest_ngsim(std::istream& is, double frame_rate = 10.0);
std::vector<Track> ingest_ngsim(const std::filesystem::path& path, double frame_rate = 10.0);

/// Dataset cache: CSV with header agent_id,frame,x_m,y_m,v,a. Empty v/a cells
/// mean the channel is absent. Values are written in shortest round-trip form.
void write_cache(std::ostream& os, std::span<const Track> tracks);
std::vector<Track> read_cache(std::istream& is, double frame_rate = 10.0);

struct SceneAgent {
  std::int64_t agent_id = 0;
  std::vector<Vec2> positions;
  std::vector<std::uint8_t> present;
  std::vector<double> speed;
  std::vector<double> accel;
};

/// Tracks aligned on a common frame range; agents[0] is the ego.
struct Scene {
  std::string id;
  double frame_rate = 10.0;
  std::int64_t first_frame = 0;
  std::size_t frames = 0;
  std::vector<SceneAgent> agents;
};

/// Frames [first, first + len) of a track; frames outside it are marked absent.
SceneAgent window(const Track& track, std::int64_t first, std::size_t len);

/// Features of every agent at scene frame t (t >= 1). Agents not observed at
/// t or t-1 yield nullopt.
std::vector<std::optional<AgentState>> compute_states(const Scene& scene, std::size_t t);

/// One window of a track: frames [first_frame, first_frame + length).
struct Segment {
  std::size_t track = 0;
  std::int64_t first_frame = 0;
};

struct SplitResult {
  std::vector<Segment> train;
  std::vector<Segment> test;
  std::size_t skipped_tracks = 0;  // shorter than one segment
};

/// Cuts every track into non-overlapping windows and splits them in time:
/// windows are ordered by start frame and the last ceil(n * test / (train + test))
/// go to the test set.
SplitResult segment_and_split(std::span<const Track> tracks, std::size_t segment_len = 200, int train_parts = 3,
                              int test_parts = 1);

/// Scene for a segment: the segment's track as ego plus up to `neighbors`
/// other tracks nearest to it at frame index t0 (absent frames masked).
Scene build_scene(std::span<const Track> tracks, const Segment& segment, std::size_t segment_len,
                  std::size_t neighbors, std::size_t t0);

struct StraightCriterion {
  double lateral_range = 0.5;  // m
  double speed_std = 0.5;      // m/s
};

bool is_straight(const Scene& scene, const StraightCriterion& criterion);

/// Keeps round(fraction * n_straight) randomly chosen straight scenes and all
/// others, preserving order.
std::vector<Scene> filter_straight(std::vector<Scene> scenes, double fraction, const StraightCriterion& criterion,
                                   Rng& rng);

/// Prediction sample at t0 = history: states for frames 1..history, future
/// displacements of the ego for frames t0..end.
Sample make_sample(const Scene& scene, std::size_t history);

}  // namespace polytraj::data
