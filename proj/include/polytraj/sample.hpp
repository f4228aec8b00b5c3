#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "polytraj/types.hpp"

namespace polytraj {

/// Per-frame features of one agent: position increments (m/frame), speed (m/s),
/// acceleration (m/s^2), heading (rad), and polar position relative to the ego (m, rad).
struct AgentState {
  double dx = 0.0;
  double dy = 0.0;
  double v = 0.0;
  double alpha = 0.0;
  double theta = 0.0;
  double l = 0.0;
  double phi = 0.0;
};

inline constexpr std::size_t kStateFeatures = 7;

struct AgentHistory {
  std::vector<AgentState> states;
  std::vector<std::uint8_t> present;  // 0 where the agent is not observed; its state is zeros
};

/// One prediction problem. agents[0] is the target, which is also the ego: the
/// output frame is centred on it at t0, so future[0] is the origin and
/// future[t] is its displacement t frames later.
struct Sample {
  std::string id;
  std::vector<AgentHistory> agents;
  std::vector<Vec2> future;

  std::size_t history_length() const { return agents.empty() ? 0 : agents[0].states.size(); }
  int max_offset() const { return static_cast<int>(future.size()) - 1; }
};

}  // namespace polytraj
