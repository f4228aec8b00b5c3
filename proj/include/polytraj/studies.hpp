#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "polytraj/anchoring.hpp"
#include "polytraj/metrics.hpp"
#include "polytraj/model.hpp"
#include "polytraj/train.hpp"

namespace polytraj::eval {

struct StudyReport {
  std::string name;
  std::string fingerprint;
  std::vector<EvalReport> curves;

  const EvalReport& curve(const std::string& method) const;
};

/// ADE curves of three polynomial models (2 fixed anchors at horizon/2 and
/// horizon, 25 evenly spread anchors, 2 random anchors) at every even frame.
StudyReport anchoring_study(const model::TrajectoryModel& fixed_two, const model::TrajectoryModel& dense,
                            const model::TrajectoryModel& random_two, std::span<const Sample> test);

struct NamedModel {
  std::string method;
  const model::TrajectoryModel* model = nullptr;
};

/// Side-by-side ADE curves at every even frame up to `horizon`. Coordinate
/// models are interpolated linearly between their anchors.
StudyReport anchor_count_study(std::span<const NamedModel> models, std::span<const Sample> test, int horizon);

/// Direct polynomial evaluation against least-squares extrapolation of the
/// coordinate model's points (origin included) with degree 1 and degree d,
/// every `step` frames up to `span_frames`. Samples whose ground truth is
/// shorter than the span are skipped and counted.
StudyReport extrapolation_study(const model::TrajectoryModel& coord, const model::TrajectoryModel& poly,
                                std::span<const Sample> test, int span_frames = 60, int step = 2);

/// Everything needed to train the models a study compares.
struct StudySettings {
  model::ModelConfig model;
  model::TrainOptions train;
  AnchorDistribution dist;
  std::uint64_t seed = 1;
};

/// Trains one model; init and data-order streams derive from (settings.seed, index).
model::TrajectoryModel train_variant(const StudySettings& settings, model::ModelConfig config,
                                     const ScheduleSource& schedules, std::span<const Sample> train,
                                     std::uint64_t index);

StudyReport run_anchoring_study(std::span<const Sample> train, std::span<const Sample> test,
                                const StudySettings& settings);
StudyReport run_anchor_count_study(std::span<const Sample> train, std::span<const Sample> test,
                                   const StudySettings& settings);
/// Trains both heads on a 40-frame horizon with 4 fixed anchors, then extrapolates to 60 frames.
StudyReport run_extrapolation_study(std::span<const Sample> train, std::span<const Sample> test,
                                    const StudySettings& settings);

}  // namespace polytraj::eval
