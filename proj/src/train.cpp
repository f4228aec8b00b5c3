#include "polytraj/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "polytraj/errors.hpp"

namespace polytraj::model {

void TrainOptions::validate() const {
  if (optimizer != "adam" && optimizer != "sgd") {
    throw std::invalid_argument("train.optimizer must be adam|sgd, got '" + optimizer + "'");
  }
  if (!(lr >= 0.0)) throw std::invalid_argument("train.lr must be >= 0");
  if (!(lr_final_ratio >= 0.0 && lr_final_ratio <= 1.0)) throw std::invalid_argument("train.lr_final_ratio in [0,1]");
  if (epochs < 0 || steps < 0) throw std::invalid_argument("train.epochs / train.steps must be >= 0");
  if (warmup_steps < 0) throw std::invalid_argument("train.warmup must be >= 0");
  if (batch < 1) throw std::invalid_argument("train.batch must be >= 1");
}

namespace {

// Finds the first sample in a failing batch whose own loss is not finite.
std::string offending_sample(const TrajectoryModel& model, std::span<const Sample* const> batch,
                             std::span<const AnchorSchedule> schedules) {
  for (std::size_t i = 0; i < batch.size(); ++i) {
    try {
      ad::NoGradGuard no_grad;
      const Sample* one[] = {batch[i]};
      const double l = model.loss(model.forward(one), one, schedules.subspan(i, 1)).value().item();
      if (!std::isfinite(l)) return batch[i]->id;
    } catch (const NumericalError&) {
      return batch[i]->id;
    }
  }
  return batch.front()->id;
}

}  // namespace

TrainResult train(TrajectoryModel& model, std::span<const Sample> data, const ScheduleSource& schedules,
                  const TrainOptions& options) {
  options.validate();
  schedules.validate();
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  const auto& cfg = model.config();
  if (cfg.head == HeadKind::coordinates &&
      (schedules.mode != AnchorMode::fixed || schedules.count != cfg.anchor_count ||
       schedules.horizon != cfg.horizon_frames)) {
    throw std::invalid_argument("coordinate head needs fixed anchors matching anchors.count and horizon_frames");
  }
  for (const auto& s : data) {
    if (s.max_offset() < schedules.max_offset()) {
      throw std::invalid_argument("sample '" + s.id + "' has " + std::to_string(s.max_offset()) +
                                  " future frames; anchors reach " + std::to_string(schedules.max_offset()));
    }
  }

  Rng rng(options.seed);
  Rng shuffle_rng = rng.split(1);
  Rng anchor_rng = rng.split(2);
  const auto batch_size = static_cast<std::size_t>(options.batch);
  const long per_epoch = static_cast<long>((data.size() + batch_size - 1) / batch_size);
  const long total = options.steps > 0 ? options.steps : per_epoch * options.epochs;

  ad::Adam adam({.grad_clip = options.grad_clip});
  auto params = model.parameters().items();
  model.parameters().zero_grad();

  TrainResult result;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = data.size();
  std::vector<const Sample*> batch;
  std::vector<AnchorSchedule> batch_schedules;
  for (long step = 0; step < total; ++step) {
    if (cursor >= data.size()) {
      std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
      cursor = 0;
    }
    batch.clear();
    batch_schedules.clear();
    const std::size_t end = std::min(data.size(), cursor + batch_size);
    for (; cursor < end; ++cursor) {
      batch.push_back(&data[order[cursor]]);
      batch_schedules.push_back(schedules.next(anchor_rng));
    }

    double loss_value = 0.0;
    try {
      const ad::Node loss = model.loss(model.forward(batch), batch, batch_schedules);
      loss_value = loss.value().item();
      ad::backward(loss);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string("training step ") + std::to_string(step) + ": " + e.what() +
                           " (sample '" + offending_sample(model, batch, batch_schedules) + "')");
    }
    if (!std::isfinite(loss_value)) {
      throw NumericalError("training step " + std::to_string(step) + ": non-finite loss (sample '" +
                           offending_sample(model, batch, batch_schedules) + "')");
    }

    const double progress = total > 1 ? static_cast<double>(step) / static_cast<double>(total - 1) : 0.0;
    const double ratio = options.lr_final_ratio + (1.0 - options.lr_final_ratio) * 0.5 *
                                                      (1.0 + std::cos(std::numbers::pi * progress));
    const double warm = options.warmup_steps > 0
                            ? std::min(1.0, static_cast<double>(step + 1) / static_cast<double>(options.warmup_steps))
                            : 1.0;
    const double lr = options.lr * ratio * warm;
    if (options.optimizer == "adam") {
      adam.step(params, lr);
    } else {
      ad::sgd_step(params, lr, options.grad_clip);
    }
    result.loss_curve.push_back(loss_value);
  }
  result.steps = total;
  return result;
}

}  // namespace polytraj::model
