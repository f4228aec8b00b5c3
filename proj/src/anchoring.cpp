#include "polytraj/anchoring.hpp"

#include <stdexcept>

namespace polytraj {

AnchorSchedule schedule_for_variate(int r, int count) {
  if (count < 1) throw std::invalid_argument("anchor count must be >= 1, got " + std::to_string(count));
  if (r < count) {
    throw std::invalid_argument("anchor range end " + std::to_string(r) + " is below anchor count " +
                                std::to_string(count) + "; flooring would repeat offsets");
  }
  AnchorSchedule s;
  s.offsets.reserve(static_cast<std::size_t>(count));
  const long long rr = r;
  for (long long k = 1; k <= count; ++k) s.offsets.push_back(static_cast<int>(rr * k / count));
  return s;
}

AnchorSchedule fixed_schedule(int count, int horizon) {
  if (count >= 1 && horizon < count) {
    throw std::invalid_argument("fixed schedule: horizon " + std::to_string(horizon) + " < anchor count " +
                                std::to_string(count));
  }
  return schedule_for_variate(horizon, count);
}

AnchorSchedule random_schedule(const AnchorDistribution& dist, int count, Rng& rng) {
  if (dist.min > dist.max) {
    throw std::invalid_argument("anchor distribution min " + std::to_string(dist.min) + " > max " +
                                std::to_string(dist.max));
  }
  if (dist.min < count) {
    throw std::invalid_argument("anchor distribution min " + std::to_string(dist.min) + " < anchor count " +
                                std::to_string(count));
  }
  return schedule_for_variate(rng.uniform_int(dist.min, dist.max), count);
}

std::map<int, std::size_t> schedule_histogram(const AnchorDistribution& dist, int count, std::size_t draws,
                                              Rng& rng) {
  if (draws < 1) throw std::invalid_argument("schedule histogram needs at least one draw");
  std::map<int, std::size_t> freq;
  for (std::size_t i = 0; i < draws; ++i) {
    for (int t : random_schedule(dist, count, rng).offsets) ++freq[t];
  }
  return freq;
}

AnchorMode parse_anchor_mode(const std::string& s) {
  if (s == "fixed") return AnchorMode::fixed;
  if (s == "random") return AnchorMode::random;
  throw std::invalid_argument("anchor mode must be fixed|random, got '" + s + "'");
}

std::string to_string(AnchorMode mode) { return mode == AnchorMode::fixed ? "fixed" : "random"; }

void ScheduleSource::validate() const {
  if (mode == AnchorMode::fixed) {
    (void)fixed_schedule(count, horizon);
  } else {
    if (dist.min > dist.max || dist.min < count || count < 1) {
      throw std::invalid_argument("random anchors need 1 <= count <= min <= max, got count=" +
                                  std::to_string(count) + " U{" + std::to_string(dist.min) + "," +
                                  std::to_string(dist.max) + "}");
    }
  }
}

AnchorSchedule ScheduleSource::next(Rng& rng) const {
  return mode == AnchorMode::fixed ? fixed_schedule(count, horizon) : random_schedule(dist, count, rng);
}

}  // namespace polytraj
