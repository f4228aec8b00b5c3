#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "polytraj/anchoring.hpp"
#include "polytraj/autodiff.hpp"
#include "polytraj/optim.hpp"
#include "polytraj/poly.hpp"
#include "polytraj/sample.hpp"

namespace polytraj::model {

enum class HeadKind { coordinates, polynomial };

HeadKind parse_head(const std::string& s);
std::string to_string(HeadKind head);

struct ModelConfig {
  int encoder_layers = 2;
  int decoder_layers = 3;
  int units = 32;
  HeadKind head = HeadKind::polynomial;
  int d_x = 3;
  int d_y = 3;
  int horizon_frames = 50;
  int decoder_steps = 5;
  /// Coordinate head: predicts at fixed_schedule(anchor_count, horizon_frames).
  int anchor_count = 5;
  /// Output scaling (m). Raw head outputs are unit-scale; coefficients are
  /// expressed against t / horizon_frames and converted on the way out.
  double lateral_scale = 5.0;
  double longitudinal_scale = 50.0;

  void validate() const;
  /// Raw head width: 2(d_x + d_y) for polynomials, 4T for coordinates.
  std::size_t output_width() const;
  AnchorSchedule coordinate_offsets() const { return fixed_schedule(anchor_count, horizon_frames); }

  std::map<std::string, std::string> to_header() const;
  static ModelConfig from_header(const std::map<std::string, std::string>& header);
};

/// Fixed-offset positions with per-point standard deviations (m).
struct CoordinateOutput {
  AnchorSchedule offsets;
  std::vector<Vec2> positions;
  std::vector<Vec2> sigmas;
};

using ModelOutput = std::variant<CoordinateOutput, PolyTrajectory>;

/// Positions of a prediction at integer offsets. Polynomials are evaluated
/// directly; coordinates are interpolated linearly from the origin through the
/// predicted anchors and cannot be queried past the last anchor.
std::vector<Vec2> positions_at(const ModelOutput& out, std::span<const int> offsets);

struct GruWeights {
  ad::Node input;        // [in, 3H]: update | reset | candidate
  ad::Node hidden_gates;  // [H, 2H]: update | reset
  ad::Node hidden_cand;   // [H, H]
  ad::Node bias;          // [1, 3H]
};

/// Classic GRU step (reset gate applied before the candidate matmul).
/// x: [B, in], h: [B, H] -> [B, H].
ad::Node gru_cell(const ad::Node& x, const ad::Node& h, const GruWeights& w);

/// Scaled dot-product attention of one query per row over aligned key/value
/// sets: softmax(q k^T / sqrt(d)) V. query, keys[i], values[i]: [B, d].
/// mask, when given, is [B, n] and is added to the scores (0 or a large negative).
ad::Node attention(const ad::Node& query, std::span<const ad::Node> keys, std::span<const ad::Node> values,
                   const ad::Array* mask = nullptr);

class TrajectoryModel {
 public:
  TrajectoryModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ad::ParameterSet& parameters() { return params_; }
  const ad::ParameterSet& parameters() const { return params_; }

  /// Raw head outputs [B, output_width] for a batch with equal history length.
  ad::Node forward(std::span<const Sample* const> batch) const;

  /// Mean over samples and anchors of the per-axis Gaussian NLL. For the
  /// coordinate head the schedules must equal the head's fixed offsets.
  ad::Node loss(const ad::Node& raw, std::span<const Sample* const> batch,
                std::span<const AnchorSchedule> schedules) const;

  /// Decodes one row of raw outputs.
  ModelOutput decode(const ad::Array& raw, std::size_t row) const;

  ModelOutput predict(const Sample& sample) const;
  std::vector<ModelOutput> predict(std::span<const Sample* const> batch) const;

 private:
  ad::Node param(const std::string& name, std::size_t rows, std::size_t cols, double bound);
  GruWeights make_gru(const std::string& prefix, std::size_t in, std::size_t units);

  ModelConfig config_;
  Rng init_rng_;
  ad::ParameterSet params_;
  std::vector<GruWeights> encoder_;
  std::vector<GruWeights> decoder_;
  ad::Node query_proj_, key_proj_, value_proj_;
  std::vector<ad::Node> init_weight_, init_bias_;
  ad::Node decoder_input_;
  ad::Node head_weight_, head_bias_;
};

/// Normalised network inputs for one agent state.
std::vector<double> state_features(const AgentState& s);

}  // namespace polytraj::model
