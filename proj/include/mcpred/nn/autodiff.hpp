#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "mcpred/nn/tensor.hpp"

namespace mcpred {
class Rng;
}

namespace mcpred::nn {

class Tape;

// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

// Reverse-mode computation tape. Operations append nodes in execution
// order, which is a topological order; backward() replays the recorded
// adjoint closures in reverse, once.
class Tape {
 public:
  // A non-recording tape evaluates forward values only.
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf whose value lives outside the tape. Gradients are accumulated
  // into *grad_sink when it is non-null. Repeated calls with the same
  // value pointer return the same leaf.
  Var leaf(const Tensor& value, Tensor* grad_sink);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  bool recording() const { return recording_; }
  std::size_t node_count() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and propagates. Throws std::logic_error for
  // a non-scalar loss or a tape that was already consumed.
  void backward(Var loss);

  // Gradient buffer of a node, zero-initialised on first access.
  Tensor& grad(std::uint32_t id);
  // Whether any gradient has reached the node.
  bool has_grad(std::uint32_t id) const;

  using Backward = std::function<void(Tape&, std::uint32_t self)>;
  // Records an operation result. The closure is stored only when the
  // tape records and some input requires a gradient.
  Var push(Tensor value, bool requires_grad, Backward backward);

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor* grad_sink = nullptr;
    Tensor grad;
    bool requires_grad = false;
    Backward backward;
  };

  // deque: value references stay valid while the tape grows.
  std::deque<Node> nodes_;
  std::unordered_map<const Tensor*, std::uint32_t> leaves_;
  bool recording_;
  bool consumed_ = false;
};

// ---- primitive operations -------------------------------------------------
// Shapes are (rows x cols). "Row broadcast" means the second operand may be
// 1 x cols and is applied to every row of the first.

Var matmul(Var a, Var b);
Var add(Var a, Var b);  // same shape or row broadcast
Var sub(Var a, Var b);  // same shape or row broadcast
Var mul(Var a, Var b);  // elementwise, same shape or row broadcast
Var div(Var a, Var b);  // elementwise, same shape
Var scale(Var a, double factor);
Var tanh(Var a);
Var relu(Var a);
Var sqrt(Var a);
Var abs(Var a);
Var sum(Var a);        // -> 1 x 1
Var row_sum(Var a);    // -> rows x 1
Var transpose(Var a);
Var slice_rows(Var a, std::size_t start, std::size_t count);
Var slice_cols(Var a, std::size_t start, std::size_t count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
// Rows of `table` selected by index; backward scatter-adds.
Var gather_rows(Var table, std::span<const std::int32_t> ids);
// Per-row normalisation to zero mean / unit variance, then gain and bias (1 x cols).
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-12);
// Row-wise softmax. key_valid (length cols) removes columns; query_valid
// (length rows) zeroes whole rows. Empty spans mean "all valid". A row
// with no valid column is all zeros.
Var softmax_rows(Var x, std::span<const bool> key_valid = {}, std::span<const bool> query_valid = {});
// log softmax(x)[index] for a 1 x m row, computed in log-space.
Var log_softmax_at(Var x, std::size_t index);
// Inverted dropout: surviving entries are scaled by 1/(1-rate).
Var dropout(Var x, double rate, Rng& rng);

// Max-subtracted softmax of a plain vector; throws std::invalid_argument when empty.
std::vector<double> softmax(std::span<const double> x);

}  // namespace mcpred::nn
