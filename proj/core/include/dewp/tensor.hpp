#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dewp {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorData {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until a backward pass populates it
  bool requires_grad = false;
};
}  // namespace detail

class Tape;

/// Dense row-major tensor of 64-bit floats. Copies are shallow handles to
/// shared storage; values are immutable during a recorded forward pass.
/// Use clone() for an independent deep copy and mutable_values() only for
/// out-of-tape updates (optimizer steps, test setup).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor ones(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);

  bool defined() const { return d_ != nullptr; }
  const Shape& shape() const;
  int ndim() const;
  int dim(int axis) const;
  std::int64_t numel() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  /// Scalar read; throws ContractError unless numel() == 1.
  double value() const;
  double at(int i) const;
  double at(int i, int j) const;

  Tensor& set_requires_grad(bool on = true);
  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;

  /// Deep copy of the values. The copy is detached (requires_grad = false).
  Tensor clone() const;

 private:
  explicit Tensor(std::shared_ptr<detail::TensorData> d) : d_(std::move(d)) {}
  std::shared_ptr<detail::TensorData> d_;
  friend class Tape;
  friend class OpRecorder;
};

/// Append-only record of the primitive operations executed while a TapeScope
/// is active. Nodes are stored in execution order, so every node's inputs
/// precede it; backward() visits each node exactly once in reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Reverse sweep from a scalar loss. Gradients of every tensor touched by
  /// this tape are overwritten (not accumulated across calls); afterwards
  /// grad() on grad-enabled leaves holds d(loss)/d(leaf).
  void backward(const Tensor& loss);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<std::shared_ptr<detail::TensorData>> inputs;
    std::shared_ptr<detail::TensorData> output;
    std::function<void()> pull;  // propagates output grad into input grads
  };
  std::vector<Node> nodes_;
  friend class OpRecorder;
};

/// RAII activation of a tape on the current thread. Ops record onto the
/// innermost active tape; with none active they just compute values.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// ---- primitive operations ------------------------------------------------
// Each op validates shapes (DimensionError on mismatch), computes the value,
// and records its derivative rule when a tape is active and some input
// requires gradients.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// 1-d cross-correlation (no kernel flip), stride 1, zero padding (k-1)/2 on
/// each side so the output length equals the input length. kernel size must
/// be odd (ConfigError otherwise).
/// x: (c_in, L), kernels: (c_out, c_in, k), bias: (c_out) -> (c_out, L).
Tensor conv1d(const Tensor& x, const Tensor& kernels, const Tensor& bias);

/// Elementwise max(0, x); subgradient at exactly 0 is 0.
Tensor relu(const Tensor& x);

/// Row-wise softmax with max subtraction; each output row sums to 1.
Tensor softmax_rows(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

/// x: (m, n) plus bias (n) added to every row.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);
/// x: (m, n) plus bias (m) added to every column.
Tensor add_col_bias(const Tensor& x, const Tensor& bias);

/// Columns [c0, c1) of a matrix.
Tensor slice_cols(const Tensor& x, int c0, int c1);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);

/// Gathers rows of a (rows, width) table; duplicate indices accumulate
/// gradient into the same row.
Tensor select_rows(const Tensor& table, const std::vector<int>& indices);

Tensor reshape(const Tensor& x, Shape shape);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
/// for a scalar-valued f at x. f must not depend on external mutable state.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double step);

}  // namespace dewp
