#include "polytraj/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include "polytraj/errors.hpp"

namespace polytraj::ad {

namespace {

std::atomic<std::uint64_t> g_next_id{1};
thread_local bool t_grad_enabled = true;

using Impl = std::shared_ptr<NodeImpl>;
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

Node make_node(Array value, const char* op, std::vector<Impl> parents, std::function<void(NodeImpl&)> bw) {
  if (!value.all_finite()) {
    throw NumericalError(std::string("non-finite value produced by ") + op + " with output shape " +
                         to_string(value.shape()));
  }
  auto impl = std::make_shared<NodeImpl>();
  impl->value = std::move(value);
  impl->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  impl->op = op;
  const bool any = t_grad_enabled && std::any_of(parents.begin(), parents.end(),
                                                 [](const Impl& p) { return p->requires_grad; });
  if (any) {
    impl->requires_grad = true;
    impl->parents = std::move(parents);
    impl->backward = std::move(bw);
  }
  return Node(std::move(impl));
}

void accumulate(NodeImpl& node, Array g) {
  if (!node.requires_grad) return;
  if (!node.has_grad) {
    node.grad = std::move(g);
    node.has_grad = true;
  } else {
    node.grad += g;
  }
}

struct Broadcast {
  std::size_t rows, cols;
  Shape shape;
};

Broadcast broadcast_shape(const char* op, const Array& a, const Array& b) {
  if (a.rank() > 2 || b.rank() > 2) {
    throw ShapeError(std::string(op) + ": rank > 2 operands " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  auto pick = [&](std::size_t x, std::size_t y) -> std::size_t {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  };
  Broadcast out;
  out.rows = pick(a.rows(), b.rows());
  out.cols = pick(a.cols(), b.cols());
  const std::size_t rank = std::max(a.rank(), b.rank());
  if (rank == 2) {
    out.shape = {out.rows, out.cols};
  } else if (rank == 1) {
    out.shape = {out.cols};
  }
  return out;
}

template <typename F>
Array broadcast_apply(const Broadcast& bc, const Array& a, const Array& b, F f) {
  Array out(bc.shape);
  if (a.size() == b.size() && a.size() == out.size()) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
  }
  const std::size_t ar = a.rows(), ac = a.cols(), br = b.rows(), bcl = b.cols();
  for (std::size_t i = 0; i < bc.rows; ++i) {
    const std::size_t ai = (ar == 1 ? 0 : i) * ac;
    const std::size_t bi = (br == 1 ? 0 : i) * bcl;
    for (std::size_t j = 0; j < bc.cols; ++j) {
      out[i * bc.cols + j] = f(a[ai + (ac == 1 ? 0 : j)], b[bi + (bcl == 1 ? 0 : j)]);
    }
  }
  return out;
}

// Sum a broadcast-shaped gradient back down to `target`.
Array reduce_to(const Array& g, const Array& target) {
  if (g.size() == target.size()) return Array(target.shape(), std::vector<double>(g.values().begin(), g.values().end()));
  Array out(target.shape());
  const std::size_t tr = target.rows(), tc = target.cols();
  const std::size_t gr = g.rows(), gc = g.cols();
  for (std::size_t i = 0; i < gr; ++i) {
    const std::size_t oi = (tr == 1 ? 0 : i) * tc;
    for (std::size_t j = 0; j < gc; ++j) out[oi + (tc == 1 ? 0 : j)] += g[i * gc + j];
  }
  return out;
}

template <typename F>
Array map_values(const Array& x, F f) {
  Array out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

void require_matrix(const char* op, const Array& x) {
  if (x.rank() != 2) throw ShapeError(std::string(op) + ": expected rank-2 operand, got " + to_string(x.shape()));
}

std::size_t axis_index(const char* op, int axis) {
  if (axis != 0 && axis != 1) throw ShapeError(std::string(op) + ": axis must be 0 or 1");
  return static_cast<std::size_t>(axis);
}

double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Array Node::grad() const {
  if (impl_->has_grad) return impl_->grad;
  return Array::zeros_like(impl_->value);
}

void Node::zero_grad() {
  impl_->grad = Array::zeros_like(impl_->value);
  impl_->has_grad = false;
}

Array& Node::mutable_grad() {
  if (!impl_->has_grad) {
    impl_->grad = Array::zeros_like(impl_->value);
    impl_->has_grad = true;
  }
  return impl_->grad;
}

Node constant(Array value) {
  auto impl = std::make_shared<NodeImpl>();
  impl->value = std::move(value);
  impl->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  impl->op = "constant";
  return Node(std::move(impl));
}

Node variable(Array value) {
  auto impl = std::make_shared<NodeImpl>();
  impl->value = std::move(value);
  impl->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  impl->requires_grad = true;
  impl->op = "variable";
  return Node(std::move(impl));
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

Node add(const Node& a, const Node& b) {
  const auto bc = broadcast_shape("add", a.value(), b.value());
  return make_node(broadcast_apply(bc, a.value(), b.value(), [](double x, double y) { return x + y; }), "add",
                   {a.impl(), b.impl()}, [](NodeImpl& self) {
                     auto& pa = *self.parents[0];
                     auto& pb = *self.parents[1];
                     if (pa.requires_grad) accumulate(pa, reduce_to(self.grad, pa.value));
                     if (pb.requires_grad) accumulate(pb, reduce_to(self.grad, pb.value));
                   });
}

Node sub(const Node& a, const Node& b) {
  const auto bc = broadcast_shape("sub", a.value(), b.value());
  return make_node(broadcast_apply(bc, a.value(), b.value(), [](double x, double y) { return x - y; }), "sub",
                   {a.impl(), b.impl()}, [](NodeImpl& self) {
                     auto& pa = *self.parents[0];
                     auto& pb = *self.parents[1];
                     if (pa.requires_grad) accumulate(pa, reduce_to(self.grad, pa.value));
                     if (pb.requires_grad) {
                       Array g = reduce_to(self.grad, pb.value);
                       for (auto& v : g.values()) v = -v;
                       accumulate(pb, std::move(g));
                     }
                   });
}

Node mul(const Node& a, const Node& b) {
  const auto bc = broadcast_shape("mul", a.value(), b.value());
  return make_node(broadcast_apply(bc, a.value(), b.value(), [](double x, double y) { return x * y; }), "mul",
                   {a.impl(), b.impl()}, [bc](NodeImpl& self) {
                     auto& pa = *self.parents[0];
                     auto& pb = *self.parents[1];
                     auto times = [](double x, double y) { return x * y; };
                     if (pa.requires_grad) {
                       accumulate(pa, reduce_to(broadcast_apply(bc, self.grad, pb.value, times), pa.value));
                     }
                     if (pb.requires_grad) {
                       accumulate(pb, reduce_to(broadcast_apply(bc, self.grad, pa.value, times), pb.value));
                     }
                   });
}

Node matmul(const Node& a, const Node& b) {
  const Array& av = a.value();
  const Array& bv = b.value();
  require_matrix("matmul", av);
  require_matrix("matmul", bv);
  const std::size_t n = av.shape()[0], k = av.shape()[1], m = bv.shape()[1];
  if (bv.shape()[0] != k) {
    throw ShapeError("matmul: inner extents differ, shapes " + to_string(av.shape()) + " and " +
                     to_string(bv.shape()));
  }
  Array out(Shape{n, m});
  MutMap(out.data(), n, m).noalias() = ConstMap(av.data(), n, k) * ConstMap(bv.data(), k, m);
  return make_node(std::move(out), "matmul", {a.impl(), b.impl()}, [n, k, m](NodeImpl& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    ConstMap g(self.grad.data(), n, m);
    if (pa.requires_grad) {
      Array ga(Shape{n, k});
      MutMap(ga.data(), n, k).noalias() = g * ConstMap(pb.value.data(), k, m).transpose();
      accumulate(pa, std::move(ga));
    }
    if (pb.requires_grad) {
      Array gb(Shape{k, m});
      MutMap(gb.data(), k, m).noalias() = ConstMap(pa.value.data(), n, k).transpose() * g;
      accumulate(pb, std::move(gb));
    }
  });
}

Node sigmoid(const Node& x) {
  return make_node(map_values(x.value(), stable_sigmoid), "sigmoid", {x.impl()}, [](NodeImpl& self) {
    Array g(self.value.shape());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = self.value[i];
      g[i] = self.grad[i] * y * (1.0 - y);
    }
    accumulate(*self.parents[0], std::move(g));
  });
}

Node tanh(const Node& x) {
  return make_node(map_values(x.value(), [](double v) { return std::tanh(v); }), "tanh", {x.impl()},
                   [](NodeImpl& self) {
                     Array g(self.value.shape());
                     for (std::size_t i = 0; i < g.size(); ++i) {
                       const double y = self.value[i];
                       g[i] = self.grad[i] * (1.0 - y * y);
                     }
                     accumulate(*self.parents[0], std::move(g));
                   });
}

Node exp(const Node& x) {
  return make_node(map_values(x.value(), [](double v) { return std::exp(v); }), "exp", {x.impl()},
                   [](NodeImpl& self) {
                     Array g(self.value.shape());
                     for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * self.value[i];
                     accumulate(*self.parents[0], std::move(g));
                   });
}

Node log(const Node& x) {
  for (double v : x.value().values()) {
    if (!(v > 0.0)) throw NumericalError("log of non-positive value " + std::to_string(v));
  }
  return make_node(map_values(x.value(), [](double v) { return std::log(v); }), "log", {x.impl()},
                   [](NodeImpl& self) {
                     const auto& in = self.parents[0]->value;
                     Array g(self.value.shape());
                     for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] / in[i];
                     accumulate(*self.parents[0], std::move(g));
                   });
}

Node power(const Node& x, double exponent) {
  const bool integral = exponent == std::floor(exponent);
  if (!integral) {
    for (double v : x.value().values()) {
      if (v < 0.0) throw NumericalError("power: negative base with non-integer exponent");
    }
  }
  return make_node(map_values(x.value(), [exponent](double v) { return std::pow(v, exponent); }), "power",
                   {x.impl()}, [exponent](NodeImpl& self) {
                     const auto& in = self.parents[0]->value;
                     Array g(self.value.shape());
                     for (std::size_t i = 0; i < g.size(); ++i) {
                       g[i] = self.grad[i] * exponent * std::pow(in[i], exponent - 1.0);
                     }
                     accumulate(*self.parents[0], std::move(g));
                   });
}

Node scale(const Node& x, double factor) {
  return make_node(map_values(x.value(), [factor](double v) { return v * factor; }), "scale", {x.impl()},
                   [factor](NodeImpl& self) {
                     Array g(self.value.shape());
                     for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * factor;
                     accumulate(*self.parents[0], std::move(g));
                   });
}

Node sum(const Node& x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  return make_node(Array::scalar(total), "sum", {x.impl()}, [](NodeImpl& self) {
    auto& p = *self.parents[0];
    accumulate(p, Array(p.value.shape(), self.grad[0]));
  });
}

Node sum(const Node& x, int axis) {
  const Array& v = x.value();
  require_matrix("sum", v);
  const std::size_t ax = axis_index("sum", axis);
  const std::size_t r = v.shape()[0], c = v.shape()[1];
  Array out(ax == 0 ? Shape{1, c} : Shape{r, 1});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[ax == 0 ? j : i] += v[i * c + j];
  }
  return make_node(std::move(out), "sum_axis", {x.impl()}, [ax, r, c](NodeImpl& self) {
    Array g(Shape{r, c});
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] = self.grad[ax == 0 ? j : i];
    }
    accumulate(*self.parents[0], std::move(g));
  });
}

Node mean(const Node& x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Node mean(const Node& x, int axis) {
  require_matrix("mean", x.value());
  const std::size_t n = x.value().shape()[axis_index("mean", axis)];
  return scale(sum(x, axis), 1.0 / static_cast<double>(n));
}

Node concat(std::span<const Node> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  const std::size_t ax = axis_index("concat", axis);
  const std::size_t other = 1 - ax;
  for (const auto& p : parts) require_matrix("concat", p.value());
  const std::size_t fixed = parts[0].value().shape()[other];
  std::size_t total = 0;
  std::vector<std::size_t> extents;
  for (const auto& p : parts) {
    if (p.value().shape()[other] != fixed) {
      throw ShapeError("concat: shapes " + to_string(parts[0].value().shape()) + " and " +
                       to_string(p.value().shape()) + " differ off axis " + std::to_string(axis));
    }
    extents.push_back(p.value().shape()[ax]);
    total += extents.back();
  }
  const std::size_t rows = ax == 0 ? total : fixed;
  const std::size_t cols = ax == 0 ? fixed : total;
  Array out(Shape{rows, cols});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Array& v = parts[k].value();
    const std::size_t pr = v.shape()[0], pc = v.shape()[1];
    for (std::size_t i = 0; i < pr; ++i) {
      for (std::size_t j = 0; j < pc; ++j) {
        if (ax == 0) {
          out[(offset + i) * cols + j] = v[i * pc + j];
        } else {
          out[i * cols + offset + j] = v[i * pc + j];
        }
      }
    }
    offset += extents[k];
  }
  std::vector<Impl> parents;
  for (const auto& p : parts) parents.push_back(p.impl());
  return make_node(std::move(out), "concat", std::move(parents), [ax, cols, extents](NodeImpl& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      auto& p = *self.parents[k];
      if (p.requires_grad) {
        const std::size_t pr = p.value.shape()[0], pc = p.value.shape()[1];
        Array g(p.value.shape());
        for (std::size_t i = 0; i < pr; ++i) {
          for (std::size_t j = 0; j < pc; ++j) {
            g[i * pc + j] = ax == 0 ? self.grad[(offset + i) * cols + j] : self.grad[i * cols + offset + j];
          }
        }
        accumulate(p, std::move(g));
      }
      offset += extents[k];
    }
  });
}

Node slice(const Node& x, int axis, std::size_t begin, std::size_t end) {
  const Array& v = x.value();
  require_matrix("slice", v);
  const std::size_t ax = axis_index("slice", axis);
  if (begin >= end || end > v.shape()[ax]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") out of bounds for " +
                     to_string(v.shape()) + " on axis " + std::to_string(axis));
  }
  const std::size_t r = v.shape()[0], c = v.shape()[1];
  const std::size_t orows = ax == 0 ? end - begin : r;
  const std::size_t ocols = ax == 0 ? c : end - begin;
  Array out(Shape{orows, ocols});
  const std::size_t r0 = ax == 0 ? begin : 0, c0 = ax == 0 ? 0 : begin;
  for (std::size_t i = 0; i < orows; ++i) {
    for (std::size_t j = 0; j < ocols; ++j) out[i * ocols + j] = v[(r0 + i) * c + c0 + j];
  }
  return make_node(std::move(out), "slice", {x.impl()}, [r, c, r0, c0, orows, ocols](NodeImpl& self) {
    Array g(Shape{r, c});
    for (std::size_t i = 0; i < orows; ++i) {
      for (std::size_t j = 0; j < ocols; ++j) g[(r0 + i) * c + c0 + j] = self.grad[i * ocols + j];
    }
    accumulate(*self.parents[0], std::move(g));
  });
}

Node softmax(const Node& x) {
  const Array& v = x.value();
  const std::size_t r = v.rows(), c = v.cols();
  Array out(v.shape());
  for (std::size_t i = 0; i < r; ++i) {
    double hi = v[i * c];
    for (std::size_t j = 1; j < c; ++j) hi = std::max(hi, v[i * c + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (out[i * c + j] = std::exp(v[i * c + j] - hi));
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= z;
  }
  return make_node(std::move(out), "softmax", {x.impl()}, [r, c](NodeImpl& self) {
    Array g(self.value.shape());
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += self.grad[i * c + j] * self.value[i * c + j];
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] = self.value[i * c + j] * (self.grad[i * c + j] - dot);
    }
    accumulate(*self.parents[0], std::move(g));
  });
}

void backward(const Node& loss) {
  if (loss.value().size() != 1) {
    throw ShapeError("backward: loss must be scalar-shaped, got " + to_string(loss.value().shape()));
  }
  if (!loss.requires_grad()) return;

  std::vector<NodeImpl*> order;
  std::unordered_set<NodeImpl*> seen;
  std::vector<NodeImpl*> stack{loss.impl().get()};
  while (!stack.empty()) {
    NodeImpl* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(), [](const NodeImpl* a, const NodeImpl* b) { return a->id > b->id; });

  for (NodeImpl* n : order) {
    if (n->backward) n->has_grad = false;
  }
  accumulate(*loss.impl(), Array(loss.value().shape(), 1.0));
  for (NodeImpl* n : order) {
    if (n->backward && n->has_grad) n->backward(*n);
  }
}

}  // namespace polytraj::ad
