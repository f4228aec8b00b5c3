#include "polytraj/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "polytraj/errors.hpp"

namespace polytraj::ad {

Node ParameterSet::add(const std::string& name, Array init) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  params_.push_back({name, variable(std::move(init))});
  return params_.back().node;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  auto it = std::find_if(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
  return it == params_.end() ? nullptr : &*it;
}

std::size_t ParameterSet::value_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.node.value().size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.node.zero_grad();
}

std::map<std::string, Array> ParameterSet::snapshot() const {
  std::map<std::string, Array> out;
  for (const auto& p : params_) out.emplace(p.name, p.node.value());
  return out;
}

namespace {

void check_finite_gradients(std::span<Parameter> params) {
  for (const auto& p : params) {
    if (p.node.has_grad() && !p.node.grad().all_finite()) {
      throw NumericalError("non-finite gradient in parameter '" + p.name + "'");
    }
  }
}

double clamp_grad(double g, double clip) { return clip > 0.0 ? std::clamp(g, -clip, clip) : g; }

}  // namespace

void sgd_step(std::span<Parameter> params, double lr, double grad_clip) {
  check_finite_gradients(params);
  for (auto& p : params) {
    if (p.node.has_grad()) {
      Array& value = p.node.mutable_value();
      const Array& grad = p.node.mutable_grad();
      for (std::size_t i = 0; i < value.size(); ++i) value[i] -= lr * clamp_grad(grad[i], grad_clip);
    }
    p.node.zero_grad();
  }
}

void Adam::step(std::span<Parameter> params, double lr) {
  check_finite_gradients(params);
  ++step_count_;
  const double bias1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_count_));
  const double bias2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_count_));
  for (auto& p : params) {
    Array& value = p.node.mutable_value();
    auto [it, inserted] = moments_.try_emplace(p.name, Array::zeros_like(value), Array::zeros_like(value));
    auto& [m, v] = it->second;
    if (p.node.has_grad()) {
      const Array& grad = p.node.mutable_grad();
      for (std::size_t i = 0; i < value.size(); ++i) {
        const double g = clamp_grad(grad[i], options_.grad_clip);
        m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g;
        v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g * g;
        value[i] -= lr * (m[i] / bias1) / (std::sqrt(v[i] / bias2) + options_.epsilon);
      }
    }
    p.node.zero_grad();
  }
}

}  // namespace polytraj::ad
