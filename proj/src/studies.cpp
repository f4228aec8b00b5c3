#include "polytraj/studies.hpp"

#include <stdexcept>

namespace polytraj::eval {

using model::HeadKind;
using model::ModelConfig;
using model::TrajectoryModel;

const EvalReport& StudyReport::curve(const std::string& method) const {
  for (const auto& c : curves) {
    if (c.method == method) return c;
  }
  throw std::out_of_range("study '" + name + "' has no curve '" + method + "'");
}

namespace {

EvalReport curve_for(const TrajectoryModel& m, const std::string& method, std::span<const Sample> test,
                     std::span<const int> offsets) {
  const auto rows = predict_positions(m, test, offsets);
  EvalReport r = evaluate_positions(rows, test, offsets);
  r.method = method;
  return r;
}

}  // namespace

StudyReport anchoring_study(const TrajectoryModel& fixed_two, const TrajectoryModel& dense,
                            const TrajectoryModel& random_two, std::span<const Sample> test) {
  const auto offsets = even_offsets(fixed_two.config().horizon_frames);
  StudyReport report;
  report.name = "anchoring";
  report.curves.push_back(curve_for(fixed_two, "fixed_2", test, offsets));
  report.curves.push_back(curve_for(dense, "fixed_25", test, offsets));
  report.curves.push_back(curve_for(random_two, "random_2", test, offsets));
  return report;
}

StudyReport anchor_count_study(std::span<const NamedModel> models, std::span<const Sample> test, int horizon) {
  const auto offsets = even_offsets(horizon);
  StudyReport report;
  report.name = "anchor_count";
  for (const auto& nm : models) report.curves.push_back(curve_for(*nm.model, nm.method, test, offsets));
  return report;
}

StudyReport extrapolation_study(const TrajectoryModel& coord, const TrajectoryModel& poly,
                                std::span<const Sample> test, int span_frames, int step) {
  if (coord.config().head != HeadKind::coordinates || poly.config().head != HeadKind::polynomial) {
    throw std::invalid_argument("extrapolation study needs a coordinate model and a polynomial model");
  }
  std::vector<int> offsets;
  for (int t = step; t <= span_frames; t += step) offsets.push_back(t);

  std::vector<Sample> usable;
  std::size_t skipped = 0;
  for (const auto& s : test) {
    if (s.max_offset() >= span_frames) {
      usable.push_back(s);
    } else {
      ++skipped;
    }
  }
  if (usable.empty()) throw std::invalid_argument("extrapolation study: no sample covers the evaluation span");

  const auto poly_rows = predict_positions(poly, usable, offsets);
  const auto coord_out = predict_all(coord, usable);
  const int degree_x = poly.config().d_x;
  const int degree_y = poly.config().d_y;

  std::vector<std::vector<Vec2>> linear_rows, degree_rows;
  for (const auto& out : coord_out) {
    const auto& c = std::get<model::CoordinateOutput>(out);
    std::vector<FitPoint> xs{{0.0, 0.0}}, ys{{0.0, 0.0}};
    for (std::size_t k = 0; k < c.offsets.count(); ++k) {
      xs.push_back({static_cast<double>(c.offsets.offsets[k]), c.positions[k].x});
      ys.push_back({static_cast<double>(c.offsets.offsets[k]), c.positions[k].y});
    }
    const FitResult lx = least_squares_fit(xs, 1), ly = least_squares_fit(ys, 1);
    const FitResult dx = least_squares_fit(xs, degree_x), dy = least_squares_fit(ys, degree_y);
    auto& lin = linear_rows.emplace_back();
    auto& deg = degree_rows.emplace_back();
    for (int t : offsets) {
      lin.push_back({lx(t), ly(t)});
      deg.push_back({dx(t), dy(t)});
    }
  }

  StudyReport report;
  report.name = "extrapolation";
  auto add = [&](const std::vector<std::vector<Vec2>>& rows, const std::string& method) {
    EvalReport r = evaluate_positions(rows, usable, offsets);
    r.method = method;
    r.skipped = skipped;
    report.curves.push_back(std::move(r));
  };
  add(poly_rows, "poly");
  add(linear_rows, "coord_linear_fit");
  add(degree_rows, "coord_degree_fit");
  return report;
}

TrajectoryModel train_variant(const StudySettings& settings, ModelConfig config, const ScheduleSource& schedules,
                              std::span<const Sample> train, std::uint64_t index) {
  const Rng root(settings.seed);
  TrajectoryModel m(config, root.split(2 * index).seed());
  model::TrainOptions options = settings.train;
  options.seed = root.split(2 * index + 1).seed();
  model::train(m, train, schedules, options);
  return m;
}

namespace {

ScheduleSource fixed_source(int count, int horizon) {
  return {AnchorMode::fixed, count, horizon, {}};
}

ModelConfig with_head(ModelConfig c, HeadKind head, int anchors) {
  c.head = head;
  c.anchor_count = anchors;
  return c;
}

}  // namespace

StudyReport run_anchoring_study(std::span<const Sample> train, std::span<const Sample> test,
                                const StudySettings& settings) {
  const int h = settings.model.horizon_frames;
  const ModelConfig poly = with_head(settings.model, HeadKind::polynomial, 2);
  const auto fixed_two = train_variant(settings, poly, fixed_source(2, h), train, 0);
  const auto dense = train_variant(settings, with_head(poly, HeadKind::polynomial, 25), fixed_source(25, h), train, 1);
  const auto random_two =
      train_variant(settings, poly, ScheduleSource{AnchorMode::random, 2, h, settings.dist}, train, 2);
  return anchoring_study(fixed_two, dense, random_two, test);
}

StudyReport run_anchor_count_study(std::span<const Sample> train, std::span<const Sample> test,
                                   const StudySettings& settings) {
  const int h = settings.model.horizon_frames;
  std::vector<TrajectoryModel> models;
  std::vector<std::string> names;
  std::uint64_t index = 0;
  for (int anchors : {5, 25}) {
    for (HeadKind head : {HeadKind::polynomial, HeadKind::coordinates}) {
      models.push_back(
          train_variant(settings, with_head(settings.model, head, anchors), fixed_source(anchors, h), train, index++));
      names.push_back((head == HeadKind::polynomial ? "poly_" : "coord_") + std::to_string(anchors));
    }
  }
  std::vector<NamedModel> named;
  for (std::size_t i = 0; i < models.size(); ++i) named.push_back({names[i], &models[i]});
  return anchor_count_study(named, test, h);
}

StudyReport run_extrapolation_study(std::span<const Sample> train, std::span<const Sample> test,
                                    const StudySettings& settings) {
  constexpr int kTrainHorizon = 40;
  constexpr int kAnchors = 4;
  constexpr int kSpan = 60;
  ModelConfig base = settings.model;
  base.horizon_frames = kTrainHorizon;
  const auto coord = train_variant(settings, with_head(base, HeadKind::coordinates, kAnchors),
                                   fixed_source(kAnchors, kTrainHorizon), train, 0);
  const auto poly = train_variant(settings, with_head(base, HeadKind::polynomial, kAnchors),
                                  fixed_source(kAnchors, kTrainHorizon), train, 1);
  return extrapolation_study(coord, poly, test, kSpan, 2);
}

}  // namespace polytraj::eval
