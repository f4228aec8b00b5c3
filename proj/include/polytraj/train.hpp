#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "polytraj/anchoring.hpp"
#include "polytraj/model.hpp"
#include "polytraj/rng.hpp"

namespace polytraj::model {

struct TrainOptions {
  std::string optimizer = "adam";  // adam | sgd
  double lr = 3e-3;
  /// Cosine-anneal the learning rate down to lr * lr_final_ratio over the run.
  double lr_final_ratio = 0.01;
  /// Linear ramp from 0 to lr over the first warmup_steps steps.
  long warmup_steps = 0;
  double grad_clip = 1.0;
  int epochs = 10;
  int batch = 32;
  /// When > 0, overrides epochs: train exactly this many optimizer steps.
  long steps = 0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainResult {
  std::vector<double> loss_curve;  // one batch-mean loss per step
  long steps = 0;
};

/// Minibatch training. Each sample gets a fresh schedule from `schedules` per
/// visit; the coordinate head requires a fixed source matching its offsets.
/// Throws NumericalError naming the first sample whose loss is not finite.
TrainResult train(TrajectoryModel& model, std::span<const Sample> data, const ScheduleSource& schedules,
                  const TrainOptions& options);

}  // namespace polytraj::model
