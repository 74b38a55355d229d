#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace jsrl::ad {

// Log-probability written into masked softmax entries. exp() of it is exactly
// 0.0 in double precision.
inline constexpr double kMaskedLogProb = -1e30;

struct Node {
  int rows = 0;
  int cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // empty until the node takes part in backward
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

// Dense row-major matrix handle. Copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(int rows, int cols);
  static Tensor constant(int rows, int cols, std::vector<double> values);
  static Tensor parameter(int rows, int cols, std::vector<double> values);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  int rows() const { return node_->rows; }
  int cols() const { return node_->cols; }
  std::size_t size() const { return node_->value.size(); }
  std::string shape_string() const;

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  double at(int r, int c) const { return node_->value[r * node_->cols + c]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad();

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Graph recording is on by default and thread-local; roll-outs and critic
// evaluation for advantages run under NoGradGuard.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// a [r x c] plus bias [1 x c] on every row.
Tensor add_bias(const Tensor& a, const Tensor& bias);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor square(const Tensor& a);

Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, int begin, int count);
// Row i of the result is row indices[i] of a, or zeros when indices[i] < 0.
Tensor gather_rows(const Tensor& a, std::span<const int> indices);
// Row i is taken from a where take_a[i], otherwise from b.
Tensor select_rows(const std::vector<bool>& take_a, const Tensor& a, const Tensor& b);
// One entry per row: a(i, columns[i]).
Tensor pick(const Tensor& a, std::span<const int> columns);

Tensor sum_rows(const Tensor& a);  // [r x c] -> [1 x c]
Tensor sum_cols(const Tensor& a);  // [r x c] -> [r x 1]
Tensor mean(const Tensor& a);      // -> [1 x 1]

// Row-wise log of softmax restricted to mask (row-major, rows*cols entries).
// Masked entries get kMaskedLogProb and receive zero gradient. Throws
// DegenerateMask when a row has no allowed entry.
Tensor masked_log_softmax(const Tensor& logits, const std::vector<bool>& mask);

// Accumulates d(loss)/d(leaf) into every leaf that requires grad. Gradients
// of intermediate nodes are recomputed on each call.
void backward(const Tensor& loss);

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::int64_t step_count = 0;
};

AdamState make_adam_state(std::span<const Tensor> params, AdamOptions options);

// Bias-corrected Adam update of every parameter, then zeroes the gradients.
void adam_step(std::span<Tensor> params, AdamState& state);

}  // namespace jsrl::ad
