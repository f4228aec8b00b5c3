#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "polytraj/autodiff.hpp"

namespace polytraj::ad {

struct Parameter {
  std::string name;
  Node node;
};

/// Named trainable leaves of one model, in registration order.
class ParameterSet {
 public:
  /// Registers a new leaf. Throws std::invalid_argument on a duplicate name.
  Node add(const std::string& name, Array init);

  const Parameter* find(const std::string& name) const;
  std::span<Parameter> items() { return params_; }
  std::span<const Parameter> items() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t value_count() const;

  void zero_grad();
  /// Deep copy of all values, keyed by name.
  std::map<std::string, Array> snapshot() const;

 private:
  std::vector<Parameter> params_;
};

/// p <- p - lr * clamp(g, -grad_clip, grad_clip), then clears gradients.
/// grad_clip <= 0 disables clamping. Throws NumericalError naming the first
/// parameter with a non-finite gradient, before anything is modified.
void sgd_step(std::span<Parameter> params, double lr, double grad_clip);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip = 0.0;
};

class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}
  void step(std::span<Parameter> params, double lr);

 private:
  AdamOptions options_;
  long step_count_ = 0;
  std::map<std::string, std::pair<Array, Array>> moments_;
};

}  // namespace polytraj::ad
