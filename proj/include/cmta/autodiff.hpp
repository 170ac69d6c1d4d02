#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "cmta/tensor.hpp"

namespace cmta::ad {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape() const { return tape_; }
  std::size_t index() const { return index_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

// Ordered record of primitive operations. Single writer; replaying it
// backward accumulates one gradient per node, summing over every use.
class Tape {
 public:
  // Propagates the node's gradient into its inputs' gradients.
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value);
  // Borrow an external tensor; it must outlive the tape.
  Var constant_ref(const Tensor& value);
  Var leaf_ref(const Tensor& value);

  Var record(Tensor value, std::span<const Var> inputs, Backward backward);
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
  }

  // Seeds d(out)/d(out) = 1 for a single-element output and replays backward.
  void backward(Var out);

  const Tensor& value(std::size_t i) const;
  bool requires_grad(std::size_t i) const { return nodes_[i].requires_grad; }
  bool has_grad(std::size_t i) const { return !nodes_[i].grad.empty(); }
  // Gradient buffer of node i, zero-allocated on first access.
  Tensor& grad_buffer(std::size_t i);
  // Gradient after backward(); zeros when the node was never reached.
  Tensor grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }
  void clear();
  // Drops every node recorded after the first `size` nodes.
  void truncate(std::size_t size);

 private:
  struct Node {
    Tensor owned;
    const Tensor* borrowed = nullptr;
    Tensor grad;
    bool requires_grad = false;
    Backward backward;
  };
  // Deque so that value references stay valid while the tape grows.
  std::deque<Node> nodes_;
};

// Matrix primitives. Rank-1 inputs are treated as a single row; results are
// rank 2. Shape errors throw ConfigError while the graph is built.
Var matmul(Var a, Var b);     // a[m×k] · b[k×n]
Var matmul_nt(Var a, Var b);  // a[m×k] · b[n×k]ᵀ
Var linear(Var x, Var weight, Var bias);  // x·Wᵀ + b, W stored [out×in]

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, Real factor);
Var one_minus(Var x);
Var add_row_bias(Var x, Var bias);  // the only broadcast: bias[n] over every row of x[m×n]
Var add_n(std::span<const Var> terms);

Var sigmoid(Var x);
Var tanh(Var x);
Var relu(Var x);
Var log(Var x);
Var clamp(Var x, Real lo, Real hi);

// axis 0 normalizes each column, axis 1 each row.
Var softmax(Var x, int axis);
Var mean(Var x, int axis);
Var sum(Var x);

Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
Var slice_cols(Var x, std::size_t begin, std::size_t count);
Var element(Var x, std::size_t row, std::size_t col);
Var reshape(Var x, Shape shape);

// Per-row normalization followed by elementwise gamma/beta over columns.
Var layer_norm(Var x, Var gamma, Var beta, Real eps = Real(1e-5));

// Inverted dropout; identity when p == 0.
Var dropout(Var x, Real p, std::mt19937_64& rng);

// Non-recording helpers used by forward-only code paths and tests.
Tensor matmul(const Tensor& a, const Tensor& b);
Real sigmoid(Real x);

}  // namespace cmta::ad
