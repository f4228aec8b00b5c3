#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "polytraj/rng.hpp"

namespace polytraj {

/// Strictly increasing positive frame offsets at which a trajectory is supervised or scored.
struct AnchorSchedule {
  std::vector<int> offsets;

  std::size_t count() const { return offsets.size(); }
  int last() const { return offsets.back(); }
  friend bool operator==(const AnchorSchedule&, const AnchorSchedule&) = default;
};

/// Discrete uniform law U{min, max}, inclusive on both ends.
struct AnchorDistribution {
  int min = 35;
  int max = 55;
};

/// Offsets floor(horizon * k / count) for k = 1..count.
AnchorSchedule fixed_schedule(int count, int horizon);

/// Offsets floor(r * k / count) for k = 1..count, in integer arithmetic.
AnchorSchedule schedule_for_variate(int r, int count);

/// Draws r ~ U{min, max} and spreads `count` anchors evenly up to r.
AnchorSchedule random_schedule(const AnchorDistribution& dist, int count, Rng& rng);

/// How often each offset is supervised across `draws` random schedules.
std::map<int, std::size_t> schedule_histogram(const AnchorDistribution& dist, int count, std::size_t draws, Rng& rng);

enum class AnchorMode { fixed, random };

AnchorMode parse_anchor_mode(const std::string& s);
std::string to_string(AnchorMode mode);

/// Per-sample schedule generator used during training.
struct ScheduleSource {
  AnchorMode mode = AnchorMode::fixed;
  int count = 5;
  int horizon = 50;
  AnchorDistribution dist;

  /// Validates eagerly so a bad configuration fails before training starts.
  void validate() const;
  AnchorSchedule next(Rng& rng) const;
  /// Largest offset this source can emit.
  int max_offset() const { return mode == AnchorMode::fixed ? horizon : dist.max; }
};

}  // namespace polytraj
