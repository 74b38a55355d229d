#include "jsrl/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>
#include <utility>

#include "jsrl/errors.hpp"

namespace jsrl::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

thread_local bool g_grad_enabled = true;

std::shared_ptr<Node> make_node(int rows, int cols) {
  auto node = std::make_shared<Node>();
  node->rows = rows;
  node->cols = cols;
  node->value.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  return node;
}

// Attaches parents and the backward closure when any parent needs a gradient.
Tensor finish(std::shared_ptr<Node> node, std::vector<std::shared_ptr<Node>> parents,
              std::function<void(Node&)> fn) {
  if (g_grad_enabled) {
    const bool needs = std::any_of(parents.begin(), parents.end(),
                                   [](const auto& p) { return p->requires_grad; });
    if (needs) {
      node->requires_grad = true;
      node->is_leaf = false;
      node->parents = std::move(parents);
      node->backward_fn = std::move(fn);
    }
  }
  return Tensor(std::move(node));
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + a.shape_string() +
                       " and " + b.shape_string());
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, a, b);
}

template <typename Forward, typename Derivative>
Tensor unary(const Tensor& a, Forward f, Derivative df) {
  auto out = make_node(a.rows(), a.cols());
  const auto& x = a.node()->value;
  for (std::size_t i = 0; i < x.size(); ++i) out->value[i] = f(x[i]);
  return finish(out, {a.shared()}, [df](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      p.grad[i] += self.grad[i] * df(p.value[i], self.value[i]);
  });
}

}  // namespace

Tensor Tensor::zeros(int rows, int cols) { return Tensor(make_node(rows, cols)); }

Tensor Tensor::constant(int rows, int cols, std::vector<double> values) {
  if (values.size() != static_cast<std::size_t>(rows) * cols)
    throw DimensionError("constant: " + std::to_string(values.size()) +
                         " values for shape [" + std::to_string(rows) + " x " +
                         std::to_string(cols) + "]");
  auto node = std::make_shared<Node>();
  node->rows = rows;
  node->cols = cols;
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(int rows, int cols, std::vector<double> values) {
  Tensor t = constant(rows, cols, std::move(values));
  t.node_->requires_grad = true;
  t.node_->ensure_grad();
  return t;
}

Tensor Tensor::scalar(double value) { return constant(1, 1, {value}); }

std::string Tensor::shape_string() const {
  return "[" + std::to_string(rows()) + " x " + std::to_string(cols()) + "]";
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_string());
  return node_->value[0];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  const int r = a.rows(), k = a.cols(), c = b.cols();
  auto out = make_node(r, c);
  Map(out->value.data(), r, c).noalias() =
      MapC(a.node()->value.data(), r, k) * MapC(b.node()->value.data(), k, c);
  return finish(out, {a.shared(), b.shared()}, [r, k, c](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    MapC g(self.grad.data(), r, c);
    if (pa.requires_grad) {
      pa.ensure_grad();
      Map(pa.grad.data(), r, k).noalias() +=
          g * MapC(pb.value.data(), k, c).transpose();
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      Map(pb.grad.data(), k, c).noalias() +=
          MapC(pa.value.data(), r, k).transpose() * g;
    }
  });
}

namespace {

template <typename Combine, typename GradA, typename GradB>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, Combine f,
              GradA dfa, GradB dfb) {
  require_same_shape(name, a, b);
  auto out = make_node(a.rows(), a.cols());
  const auto& x = a.node()->value;
  const auto& y = b.node()->value;
  for (std::size_t i = 0; i < x.size(); ++i) out->value[i] = f(x[i], y[i]);
  return finish(out, {a.shared(), b.shared()}, [dfa, dfb](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        pa.grad[i] += self.grad[i] * dfa(pa.value[i], pb.value[i]);
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        pb.grad[i] += self.grad[i] * dfb(pa.value[i], pb.value[i]);
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) shape_error("add_bias", a, bias);
  const int r = a.rows(), c = a.cols();
  auto out = make_node(r, c);
  const auto& x = a.node()->value;
  const auto& bv = bias.node()->value;
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out->value[i * c + j] = x[i * c + j] + bv[j];
  return finish(out, {a.shared(), bias.shared()}, [r, c](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) pb.grad[j] += self.grad[i * c + j];
    }
  });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor square(const Tensor& a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const int r = parts[0].rows();
  int c = 0;
  std::vector<int> offsets;
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& p : parts) {
    if (p.rows() != r) shape_error("concat_cols", parts[0], p);
    offsets.push_back(c);
    c += p.cols();
    parents.push_back(p.shared());
  }
  auto out = make_node(r, c);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const int pc = parts[k].cols();
    const auto& v = parts[k].node()->value;
    for (int i = 0; i < r; ++i)
      std::copy_n(v.begin() + i * pc, pc, out->value.begin() + i * c + offsets[k]);
  }
  return finish(out, std::move(parents), [r, c, offsets](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      p.ensure_grad();
      const int pc = p.cols;
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < pc; ++j) p.grad[i * pc + j] += self.grad[i * c + offsets[k] + j];
    }
  });
}

Tensor slice_cols(const Tensor& a, int begin, int count) {
  if (begin < 0 || count < 0 || begin + count > a.cols())
    throw DimensionError("slice_cols: columns [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " +
                         a.shape_string());
  const int r = a.rows(), c = a.cols();
  auto out = make_node(r, count);
  const auto& v = a.node()->value;
  for (int i = 0; i < r; ++i)
    std::copy_n(v.begin() + i * c + begin, count, out->value.begin() + i * count);
  return finish(out, {a.shared()}, [r, c, begin, count](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < count; ++j) p.grad[i * c + begin + j] += self.grad[i * count + j];
  });
}

Tensor gather_rows(const Tensor& a, std::span<const int> indices) {
  const int c = a.cols();
  const int n = static_cast<int>(indices.size());
  std::vector<int> idx(indices.begin(), indices.end());
  for (int i : idx)
    if (i >= a.rows())
      throw DimensionError("gather_rows: row " + std::to_string(i) + " outside " +
                           a.shape_string());
  auto out = make_node(n, c);
  const auto& v = a.node()->value;
  for (int i = 0; i < n; ++i)
    if (idx[i] >= 0) std::copy_n(v.begin() + idx[i] * c, c, out->value.begin() + i * c);
  return finish(out, {a.shared()}, [c, idx = std::move(idx)](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0) continue;
      for (int j = 0; j < c; ++j) p.grad[idx[i] * c + j] += self.grad[i * c + j];
    }
  });
}

Tensor select_rows(const std::vector<bool>& take_a, const Tensor& a, const Tensor& b) {
  require_same_shape("select_rows", a, b);
  if (take_a.size() != static_cast<std::size_t>(a.rows()))
    throw DimensionError("select_rows: mask of length " + std::to_string(take_a.size()) +
                         " for " + a.shape_string());
  const int r = a.rows(), c = a.cols();
  auto out = make_node(r, c);
  for (int i = 0; i < r; ++i) {
    const auto& src = take_a[i] ? a.node()->value : b.node()->value;
    std::copy_n(src.begin() + i * c, c, out->value.begin() + i * c);
  }
  return finish(out, {a.shared(), b.shared()}, [r, c, take_a](Node& self) {
    for (int which = 0; which < 2; ++which) {
      Node& p = *self.parents[which];
      if (!p.requires_grad) continue;
      p.ensure_grad();
      for (int i = 0; i < r; ++i) {
        if (take_a[i] != (which == 0)) continue;
        for (int j = 0; j < c; ++j) p.grad[i * c + j] += self.grad[i * c + j];
      }
    }
  });
}

Tensor pick(const Tensor& a, std::span<const int> columns) {
  if (columns.size() != static_cast<std::size_t>(a.rows()))
    throw DimensionError("pick: " + std::to_string(columns.size()) +
                         " indices for " + a.shape_string());
  const int r = a.rows(), c = a.cols();
  std::vector<int> cols(columns.begin(), columns.end());
  auto out = make_node(r, 1);
  for (int i = 0; i < r; ++i) {
    if (cols[i] < 0 || cols[i] >= c)
      throw DimensionError("pick: column " + std::to_string(cols[i]) + " outside " +
                           a.shape_string());
    out->value[i] = a.node()->value[i * c + cols[i]];
  }
  return finish(out, {a.shared()}, [c, cols = std::move(cols)](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < cols.size(); ++i) p.grad[i * c + cols[i]] += self.grad[i];
  });
}

Tensor sum_rows(const Tensor& a) {
  const int r = a.rows(), c = a.cols();
  auto out = make_node(1, c);
  const auto& v = a.node()->value;
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out->value[j] += v[i * c + j];
  return finish(out, {a.shared()}, [r, c](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) p.grad[i * c + j] += self.grad[j];
  });
}

Tensor sum_cols(const Tensor& a) {
  const int r = a.rows(), c = a.cols();
  auto out = make_node(r, 1);
  const auto& v = a.node()->value;
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out->value[i] += v[i * c + j];
  return finish(out, {a.shared()}, [r, c](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) p.grad[i * c + j] += self.grad[i];
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw DimensionError("mean of an empty tensor");
  const double n = static_cast<double>(a.size());
  double total = 0.0;
  for (double x : a.values()) total += x;
  auto out = make_node(1, 1);
  out->value[0] = total / n;
  return finish(out, {a.shared()}, [n](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    const double g = self.grad[0] / n;
    for (double& x : p.grad) x += g;
  });
}

Tensor masked_log_softmax(const Tensor& logits, const std::vector<bool>& mask) {
  if (mask.size() != logits.size())
    throw DimensionError("masked_log_softmax: mask of length " +
                         std::to_string(mask.size()) + " for " + logits.shape_string());
  const int r = logits.rows(), c = logits.cols();
  auto out = make_node(r, c);
  const auto& y = logits.node()->value;
  for (int i = 0; i < r; ++i) {
    double top = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (int j = 0; j < c; ++j)
      if (mask[i * c + j]) {
        top = std::max(top, y[i * c + j]);
        any = true;
      }
    if (!any)
      throw DegenerateMask("masked_log_softmax: row " + std::to_string(i) +
                           " has no allowed entry");
    double total = 0.0;
    for (int j = 0; j < c; ++j)
      if (mask[i * c + j]) total += std::exp(y[i * c + j] - top);
    const double log_norm = top + std::log(total);
    for (int j = 0; j < c; ++j)
      out->value[i * c + j] = mask[i * c + j] ? y[i * c + j] - log_norm : kMaskedLogProb;
  }
  return finish(out, {logits.shared()}, [r, c, mask](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (int i = 0; i < r; ++i) {
      double gsum = 0.0;
      for (int j = 0; j < c; ++j)
        if (mask[i * c + j]) gsum += self.grad[i * c + j];
      for (int j = 0; j < c; ++j) {
        if (!mask[i * c + j]) continue;
        const double prob = std::exp(self.value[i * c + j]);
        p.grad[i * c + j] += self.grad[i * c + j] - prob * gsum;
      }
    }
  });
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw DimensionError("backward needs a scalar loss, got " +
                         (loss.defined() ? loss.shape_string() : std::string("none")));
  Node* root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS; reversed it is a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second)
        stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* node : order)
    if (!node->is_leaf) node->grad.assign(node->value.size(), 0.0);
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if (!(*it)->is_leaf && (*it)->backward_fn) (*it)->backward_fn(**it);
}

AdamState make_adam_state(std::span<const Tensor> params, AdamOptions options) {
  AdamState state;
  state.options = options;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.size(), 0.0);
    state.second_moment.emplace_back(p.size(), 0.0);
  }
  return state;
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (state.first_moment.size() != params.size())
    throw DimensionError("adam_step: state tracks " +
                         std::to_string(state.first_moment.size()) +
                         " parameters, got " + std::to_string(params.size()));
  const auto& o = state.options;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].mutable_values();
    auto grads = params[k].mutable_grad();
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grads[i];
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g;
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
    params[k].zero_grad();
  }
}

}  // namespace jsrl::ad
