#include "polytraj/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "polytraj/checkpoint.hpp"
#include "polytraj/errors.hpp"

namespace polytraj::model {

using ad::Array;
using ad::Node;
using ad::Shape;

HeadKind parse_head(const std::string& s) {
  if (s == "polynomial") return HeadKind::polynomial;
  if (s == "coordinates") return HeadKind::coordinates;
  throw std::invalid_argument("model head must be coordinates|polynomial, got '" + s + "'");
}

std::string to_string(HeadKind head) { return head == HeadKind::polynomial ? "polynomial" : "coordinates"; }

void ModelConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v < 1) throw std::invalid_argument(std::string(what) + " must be >= 1, got " + std::to_string(v));
  };
  positive(encoder_layers, "model.encoder_layers");
  positive(decoder_layers, "model.decoder_layers");
  positive(units, "model.units");
  positive(d_x, "model.d_x");
  positive(d_y, "model.d_y");
  positive(horizon_frames, "horizon_frames");
  positive(decoder_steps, "model.decoder_steps");
  positive(anchor_count, "anchors.count");
  if (head == HeadKind::coordinates) (void)coordinate_offsets();
  if (!(lateral_scale > 0.0) || !(longitudinal_scale > 0.0)) throw std::invalid_argument("output scales must be > 0");
}

std::size_t ModelConfig::output_width() const {
  return head == HeadKind::polynomial ? static_cast<std::size_t>(2 * (d_x + d_y))
                                      : static_cast<std::size_t>(4 * anchor_count);
}

std::map<std::string, std::string> ModelConfig::to_header() const {
  return {{"model.encoder_layers", std::to_string(encoder_layers)},
          {"model.decoder_layers", std::to_string(decoder_layers)},
          {"model.units", std::to_string(units)},
          {"model.head", to_string(head)},
          {"model.d_x", std::to_string(d_x)},
          {"model.d_y", std::to_string(d_y)},
          {"horizon_frames", std::to_string(horizon_frames)},
          {"model.decoder_steps", std::to_string(decoder_steps)},
          {"anchors.count", std::to_string(anchor_count)},
          {"model.lateral_scale", ad::format_double(lateral_scale)},
          {"model.longitudinal_scale", ad::format_double(longitudinal_scale)}};
}

ModelConfig ModelConfig::from_header(const std::map<std::string, std::string>& h) {
  auto get = [&](const char* key) -> const std::string& {
    auto it = h.find(key);
    if (it == h.end()) throw DataError(std::string("checkpoint header lacks ") + key);
    return it->second;
  };
  ModelConfig c;
  c.encoder_layers = std::stoi(get("model.encoder_layers"));
  c.decoder_layers = std::stoi(get("model.decoder_layers"));
  c.units = std::stoi(get("model.units"));
  c.head = parse_head(get("model.head"));
  c.d_x = std::stoi(get("model.d_x"));
  c.d_y = std::stoi(get("model.d_y"));
  c.horizon_frames = std::stoi(get("horizon_frames"));
  c.decoder_steps = std::stoi(get("model.decoder_steps"));
  c.anchor_count = std::stoi(get("anchors.count"));
  c.lateral_scale = std::stod(get("model.lateral_scale"));
  c.longitudinal_scale = std::stod(get("model.longitudinal_scale"));
  c.validate();
  return c;
}

std::vector<Vec2> positions_at(const ModelOutput& out, std::span<const int> offsets) {
  std::vector<Vec2> pts;
  pts.reserve(offsets.size());
  if (const auto* poly = std::get_if<PolyTrajectory>(&out)) {
    for (int t : offsets) pts.push_back({eval_poly(poly->a, t), eval_poly(poly->b, t)});
    return pts;
  }
  const auto& coord = std::get<CoordinateOutput>(out);
  for (int t : offsets) {
    if (t < 0 || t > coord.offsets.last()) {
      throw std::out_of_range("coordinate prediction has no value at offset " + std::to_string(t) +
                              " (last anchor " + std::to_string(coord.offsets.last()) + ")");
    }
    int t0 = 0;
    Vec2 p0{};
    for (std::size_t k = 0; k < coord.offsets.count(); ++k) {
      const int t1 = coord.offsets.offsets[k];
      const Vec2 p1 = coord.positions[k];
      if (t <= t1) {
        const double w = static_cast<double>(t - t0) / static_cast<double>(t1 - t0);
        pts.push_back(p0 + w * (p1 - p0));
        break;
      }
      t0 = t1;
      p0 = p1;
    }
  }
  return pts;
}

Node gru_cell(const Node& x, const Node& h, const GruWeights& w) {
  const std::size_t units = h.value().cols();
  if (w.hidden_cand.value().rank() != 2 || w.hidden_cand.value().shape()[0] != units ||
      w.input.value().cols() != 3 * units || x.value().cols() != w.input.value().rows()) {
    throw ShapeError("gru_cell: input " + ad::to_string(x.shape()) + ", hidden " + ad::to_string(h.shape()) +
                     " do not match weights " + ad::to_string(w.input.shape()) + " / " +
                     ad::to_string(w.hidden_cand.shape()));
  }
  const Node xw = ad::matmul(x, w.input) + w.bias;
  const Node hg = ad::matmul(h, w.hidden_gates);
  const Node z = ad::sigmoid(ad::slice(xw, 1, 0, units) + ad::slice(hg, 1, 0, units));
  const Node r = ad::sigmoid(ad::slice(xw, 1, units, 2 * units) + ad::slice(hg, 1, units, 2 * units));
  const Node n = ad::tanh(ad::slice(xw, 1, 2 * units, 3 * units) + ad::matmul(r * h, w.hidden_cand));
  return n + z * (h - n);
}

Node attention(const Node& query, std::span<const Node> keys, std::span<const Node> values, const Array* mask) {
  if (keys.empty()) throw std::invalid_argument("attention: empty key set");
  if (keys.size() != values.size()) {
    throw ShapeError("attention: " + std::to_string(keys.size()) + " keys but " + std::to_string(values.size()) +
                     " values");
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(query.value().cols()));
  std::vector<Node> scores;
  scores.reserve(keys.size());
  for (const auto& k : keys) scores.push_back(ad::scale(ad::sum(query * k, 1), inv_sqrt_d));
  Node logits = ad::concat(scores, 1);
  if (mask) logits = logits + ad::constant(*mask);
  const Node weights = ad::softmax(logits);
  Node out = ad::slice(weights, 1, 0, 1) * values[0];
  for (std::size_t i = 1; i < values.size(); ++i) out = out + ad::slice(weights, 1, i, i + 1) * values[i];
  return out;
}

std::vector<double> state_features(const AgentState& s) {
  constexpr double pi = std::numbers::pi;
  return {s.dx, s.dy, s.v / 10.0, s.alpha / 2.0, s.theta / pi, s.l / 50.0, s.phi / pi};
}

TrajectoryModel::TrajectoryModel(ModelConfig config, std::uint64_t seed) : config_(config), init_rng_(seed) {
  config_.validate();
  const auto units = static_cast<std::size_t>(config_.units);
  const double unit_bound = 1.0 / std::sqrt(static_cast<double>(units));
  std::size_t in = kStateFeatures;
  for (int l = 0; l < config_.encoder_layers; ++l) {
    encoder_.push_back(make_gru("enc" + std::to_string(l), in, units));
    in = units;
  }
  query_proj_ = param("att.query", units, units, unit_bound);
  key_proj_ = param("att.key", units, units, unit_bound);
  value_proj_ = param("att.value", units, units, unit_bound);
  const double init_bound = 1.0 / std::sqrt(2.0 * static_cast<double>(units));
  for (int l = 0; l < config_.decoder_layers; ++l) {
    init_weight_.push_back(param("dec" + std::to_string(l) + ".init_w", 2 * units, units, init_bound));
    init_bias_.push_back(param("dec" + std::to_string(l) + ".init_b", 1, units, 0.0));
  }
  decoder_input_ = param("dec.input", 1, units, 1.0);
  for (int l = 0; l < config_.decoder_layers; ++l) decoder_.push_back(make_gru("dec" + std::to_string(l), units, units));
  head_weight_ = param("head.w", units, config_.output_width(), unit_bound);
  head_bias_ = param("head.b", 1, config_.output_width(), 0.0);
}

Node TrajectoryModel::param(const std::string& name, std::size_t rows, std::size_t cols, double bound) {
  Array init(Shape{rows, cols});
  if (bound > 0.0) {
    for (auto& v : init.values()) v = init_rng_.uniform(-bound, bound);
  }
  return params_.add(name, std::move(init));
}

GruWeights TrajectoryModel::make_gru(const std::string& prefix, std::size_t in, std::size_t units) {
  GruWeights w;
  w.input = param(prefix + ".w_in", in, 3 * units, 1.0 / std::sqrt(static_cast<double>(in)));
  const double hb = 1.0 / std::sqrt(static_cast<double>(units));
  w.hidden_gates = param(prefix + ".w_gates", units, 2 * units, hb);
  w.hidden_cand = param(prefix + ".w_cand", units, units, hb);
  w.bias = param(prefix + ".bias", 1, 3 * units, 0.0);
  return w;
}

Node TrajectoryModel::forward(std::span<const Sample* const> batch) const {
  if (batch.empty()) throw std::invalid_argument("forward: empty batch");
  const std::size_t frames = batch[0]->history_length();
  std::size_t agents = 0;
  for (const Sample* s : batch) {
    if (s->agents.empty() || s->history_length() == 0) {
      throw std::invalid_argument("forward: sample '" + s->id + "' has an empty history");
    }
    if (s->history_length() != frames) {
      throw ShapeError("forward: history lengths differ within a batch (" + std::to_string(frames) + " vs " +
                       std::to_string(s->history_length()) + ")");
    }
    for (const auto& a : s->agents) {
      if (a.states.size() != frames || a.present.size() != frames) {
        throw ShapeError("forward: agent history misaligned in sample '" + s->id + "'");
      }
    }
    agents = std::max(agents, s->agents.size());
  }
  const std::size_t b = batch.size();
  const std::size_t rows = agents * b;
  const auto units = static_cast<std::size_t>(config_.units);

  // Rows are agent-major: row a*B + i holds agent a of sample i.
  std::vector<Node> hidden(encoder_.size(), ad::constant(Array(Shape{rows, units})));
  for (std::size_t f = 0; f < frames; ++f) {
    Array x(Shape{rows, kStateFeatures});
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t a = 0; a < batch[i]->agents.size(); ++a) {
        const auto& hist = batch[i]->agents[a];
        if (!hist.present[f]) continue;
        const auto feats = state_features(hist.states[f]);
        std::copy(feats.begin(), feats.end(), x.data() + (a * b + i) * kStateFeatures);
      }
    }
    Node in = ad::constant(std::move(x));
    for (std::size_t l = 0; l < encoder_.size(); ++l) {
      hidden[l] = gru_cell(in, hidden[l], encoder_[l]);
      in = hidden[l];
    }
  }
  const Node& top = hidden.back();
  const Node target = ad::slice(top, 0, 0, b);

  Array mask(Shape{b, agents});
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t a = 0; a < agents; ++a) {
      const bool seen = a < batch[i]->agents.size() && batch[i]->agents[a].present[frames - 1];
      if (!seen && a != 0) mask.at(i, a) = -1e9;
    }
  }
  const Node q = ad::matmul(target, query_proj_);
  const Node k_all = ad::matmul(top, key_proj_);
  const Node v_all = ad::matmul(top, value_proj_);
  std::vector<Node> keys, values;
  for (std::size_t a = 0; a < agents; ++a) {
    keys.push_back(ad::slice(k_all, 0, a * b, (a + 1) * b));
    values.push_back(ad::slice(v_all, 0, a * b, (a + 1) * b));
  }
  const Node context = attention(q, keys, values, &mask);

  const std::vector<Node> joint_parts{context, target};
  const Node joint = ad::concat(joint_parts, 1);
  std::vector<Node> dec_hidden;
  for (std::size_t l = 0; l < decoder_.size(); ++l) {
    dec_hidden.push_back(ad::tanh(ad::matmul(joint, init_weight_[l]) + init_bias_[l]));
  }
  for (int s = 0; s < config_.decoder_steps; ++s) {
    Node in = decoder_input_;
    for (std::size_t l = 0; l < decoder_.size(); ++l) {
      dec_hidden[l] = gru_cell(in, dec_hidden[l], decoder_[l]);
      in = dec_hidden[l];
    }
  }
  return ad::matmul(dec_hidden.back(), head_weight_) + head_bias_;
}

namespace {

// Elementwise Gaussian NLL with the variance floor; all operands broadcast-compatible.
Node nll(const Node& mean, const Node& var, const Node& target) {
  const Node v = var + ad::constant(Array::scalar(kVarianceFloor));
  const Node diff = mean - target;
  return ad::scale(diff * diff * ad::power(v, -1.0), 0.5) +
         ad::scale(ad::log(ad::scale(v, 2.0 * std::numbers::pi)), 0.5);
}

}  // namespace

Node TrajectoryModel::loss(const Node& raw, std::span<const Sample* const> batch,
                           std::span<const AnchorSchedule> schedules) const {
  const std::size_t b = batch.size();
  if (schedules.size() != b) throw std::invalid_argument("loss: one schedule per sample required");
  if (raw.value().rank() != 2 || raw.value().shape()[0] != b || raw.value().shape()[1] != config_.output_width()) {
    throw ShapeError("loss: raw output shape " + ad::to_string(raw.shape()) + " does not match batch");
  }
  const std::size_t count = schedules[0].count();
  for (std::size_t i = 0; i < b; ++i) {
    if (schedules[i].count() != count) throw std::invalid_argument("loss: anchor counts differ within a batch");
    if (schedules[i].last() > batch[i]->max_offset()) {
      throw std::invalid_argument("loss: anchor offset " + std::to_string(schedules[i].last()) +
                                  " beyond ground truth of sample '" + batch[i]->id + "'");
    }
  }
  const double sx = config_.lateral_scale;
  const double sy = config_.longitudinal_scale;

  if (config_.head == HeadKind::coordinates) {
    const auto fixed = config_.coordinate_offsets();
    Array target(Shape{b, 2 * count});
    for (std::size_t i = 0; i < b; ++i) {
      if (schedules[i] != fixed) throw std::invalid_argument("coordinate head is trained only at its fixed offsets");
      for (std::size_t k = 0; k < count; ++k) {
        const Vec2 p = batch[i]->future[static_cast<std::size_t>(fixed.offsets[k])];
        target.at(i, 2 * k) = p.x;
        target.at(i, 2 * k + 1) = p.y;
      }
    }
    // Each anchor is scaled by its share of the horizon, like the polynomial terms.
    Array scales(Shape{1, 2 * count});
    for (std::size_t k = 0; k < count; ++k) {
      const double tau = fixed.offsets[k] / static_cast<double>(config_.horizon_frames);
      scales[2 * k] = sx * tau;
      scales[2 * k + 1] = sy * tau;
    }
    Array scales_sq = scales;
    for (auto& v : scales_sq.values()) v *= v;
    const Node mean = ad::slice(raw, 1, 0, 2 * count) * ad::constant(scales);
    const Node var = ad::exp(ad::scale(ad::slice(raw, 1, 2 * count, 4 * count), 2.0)) * ad::constant(scales_sq);
    return ad::scale(ad::mean(nll(mean, var, ad::constant(std::move(target)))), 2.0);
  }

  const auto dx = static_cast<std::size_t>(config_.d_x);
  const auto dy = static_cast<std::size_t>(config_.d_y);
  const double ts = config_.horizon_frames;
  Array tx(Shape{b, count}), ty(Shape{b, count});
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t k = 0; k < count; ++k) {
      const Vec2 p = batch[i]->future[static_cast<std::size_t>(schedules[i].offsets[k])];
      tx.at(i, k) = p.x;
      ty.at(i, k) = p.y;
    }
  }
  // One axis: sum_j c_j tau^j and sum_j exp(2 ls_j) tau^2j over all anchors at once.
  auto axis = [&](std::size_t coeff_begin, std::size_t sigma_begin, std::size_t degree, double s,
                  Array target) {
    Node mean, var;
    Array tau_pow(Shape{b, count}, 1.0);
    for (std::size_t j = 0; j < degree; ++j) {
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t k = 0; k < count; ++k) tau_pow.at(i, k) *= schedules[i].offsets[k] / ts;
      }
      Array tau_sq = tau_pow;
      for (auto& v : tau_sq.values()) v *= v;
      const Node c = ad::slice(raw, 1, coeff_begin + j, coeff_begin + j + 1);
      const Node sig2 = ad::exp(ad::scale(ad::slice(raw, 1, sigma_begin + j, sigma_begin + j + 1), 2.0));
      const Node m_term = c * ad::constant(tau_pow);
      const Node v_term = sig2 * ad::constant(std::move(tau_sq));
      mean = j == 0 ? m_term : mean + m_term;
      var = j == 0 ? v_term : var + v_term;
    }
    return nll(ad::scale(mean, s), ad::scale(var, s * s), ad::constant(std::move(target)));
  };
  const Node nll_x = axis(0, dx + dy, dx, sx, std::move(tx));
  const Node nll_y = axis(dx, 2 * dx + dy, dy, sy, std::move(ty));
  return ad::mean(nll_x + nll_y);
}

ModelOutput TrajectoryModel::decode(const Array& raw, std::size_t row) const {
  const std::size_t w = config_.output_width();
  if (raw.rank() != 2 || raw.shape()[1] != w || row >= raw.shape()[0]) {
    throw ShapeError("decode: raw output shape " + ad::to_string(raw.shape()) + " does not match head");
  }
  const double* r = raw.data() + row * w;
  const double sx = config_.lateral_scale;
  const double sy = config_.longitudinal_scale;
  if (config_.head == HeadKind::coordinates) {
    CoordinateOutput out;
    out.offsets = config_.coordinate_offsets();
    const std::size_t t = out.offsets.count();
    for (std::size_t k = 0; k < t; ++k) {
      const double tau = out.offsets.offsets[k] / static_cast<double>(config_.horizon_frames);
      out.positions.push_back({r[2 * k] * sx * tau, r[2 * k + 1] * sy * tau});
      out.sigmas.push_back({std::exp(r[2 * t + 2 * k]) * sx * tau, std::exp(r[2 * t + 2 * k + 1]) * sy * tau});
    }
    return out;
  }
  const auto dx = static_cast<std::size_t>(config_.d_x);
  const auto dy = static_cast<std::size_t>(config_.d_y);
  const double ts = config_.horizon_frames;
  PolyTrajectory p;
  double tj = 1.0;
  for (std::size_t j = 0; j < dx; ++j) {
    tj *= ts;
    p.a.push_back(r[j] * sx / tj);
    p.sigma_a.push_back(std::exp(r[dx + dy + j]) * sx / tj);
  }
  tj = 1.0;
  for (std::size_t j = 0; j < dy; ++j) {
    tj *= ts;
    p.b.push_back(r[dx + j] * sy / tj);
    p.sigma_b.push_back(std::exp(r[2 * dx + dy + j]) * sy / tj);
  }
  return p;
}

std::vector<ModelOutput> TrajectoryModel::predict(std::span<const Sample* const> batch) const {
  ad::NoGradGuard no_grad;
  const Node raw = forward(batch);
  std::vector<ModelOutput> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) out.push_back(decode(raw.value(), i));
  return out;
}

ModelOutput TrajectoryModel::predict(const Sample& sample) const {
  const Sample* one[] = {&sample};
  return predict(one).front();
}

}  // namespace polytraj::model
