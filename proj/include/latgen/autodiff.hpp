#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latgen/tensor.hpp"

namespace latgen {

/// A named learnable array together with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::Zero(value.rows(), value.cols())),
        trainable(train) {}

  void zero_grad() { grad.setZero(); }
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid as long as the Tape lives.
class Var {
public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }

private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Append-only reverse-mode differentiation graph. Nodes are evaluated eagerly
/// when appended; backward() replays them in exact reverse append order.
class Tape {
public:
  /// Receives the node's accumulated gradient and its forward value.
  using BackwardFn = std::function<void(const Tensor& out_grad, const Tensor& out_value, Tape& tape)>;

  /// With record == false no backward closures are stored and parameters are
  /// bound read-only; used for scoring and inference.
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf whose gradient is kept on the tape (see grad()).
  Var input(Tensor value);
  /// Leaf bound to a parameter; backward accumulates into p.grad.
  Var param(Parameter& p);
  Var param(const Parameter& p);

  /// Appends a computed node. `fn` is dropped if no input requires a gradient.
  Var push(Tensor value, std::span<const Var> inputs, BackwardFn fn);

  /// Seeds d(root)/d(root) = seed and runs every stored backward closure once.
  /// Returns the number of nodes whose closure ran.
  std::size_t backward(Var root, double seed = 1.0);

  /// Adds `delta` into the gradient buffer of node `id` (no-op if it needs none).
  template <typename Derived>
  void accumulate(int id, const Eigen::MatrixBase<Derived>& delta) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) return;
    Tensor& g = grad_buffer(n);
    require_shape(g.rows() == delta.rows() && g.cols() == delta.cols(), "accumulate", g.rows(),
                  g.cols(), delta.rows(), delta.cols());
    g += delta;
  }

  /// Gradient accumulated on a leaf created with input(); empty if none.
  const Tensor& grad(Var v) const;
  const Tensor& value(int id) const;
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  /// Returns a reference to the node's gradient buffer, allocating it on first use.
  Tensor& grad_buffer_for(int id) { return grad_buffer(nodes_[static_cast<std::size_t>(id)]); }

private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor grad;
    Tensor* external_grad = nullptr;
    bool requires_grad = false;
    BackwardFn backward;

    const Tensor& value() const { return external ? *external : owned; }
  };

  Tensor& grad_buffer(Node& n);

  std::vector<Node> nodes_;
  bool record_;
};

// ---------------------------------------------------------------------------
// Differentiable operations. All take and return Vars on the same Tape.

Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var matmul(Var a, Var b);
/// a[n x k] + row[1 x k] broadcast to every row.
Var add_row(Var a, Var row);
/// x W + b with b broadcast across rows.
Var affine(Var x, Var w, Var b);
Var sigmoid(Var a);
Var tanh(Var a);
/// Sum of all coefficients as a 1x1 node.
Var sum(Var a);
/// Column-wise mean over rows: [n x k] -> [1 x k].
Var mean_rows(Var a);
Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
Var slice_cols(Var a, Index begin, Index count);
Var transpose(Var a);
/// Rows `ids` of table, stacked: [len(ids) x k]. Backward scatter-adds.
Var gather_rows(Var table, std::span<const int> ids);
/// out[i] = a(i, cols[i]) as an [n x 1] column.
Var pick(Var a, std::span<const int> cols);
Var log_softmax_rows(Var a);
/// log(sum(exp(a))) over all coefficients, as a 1x1 node.
Var log_sum_exp(Var a);
/// out[0, i] = dot(a.row(i), b.row(i)).
Var row_dot(Var a, Var b);
/// sum_i a(i) * weights(i) with constant weights; a and weights have equal size.
Var dot_const(Var a, const Tensor& weights);

struct LstmWeights {
  Var input_weight;   // [d_in x 4h], gate blocks [i, f, g, o]
  Var hidden_weight;  // [h x 4h]
  Var bias;           // [1 x 4h]
};

struct LstmStep {
  Var h;
  Var c;
};

/// One LSTM step built from primitive ops (no peepholes).
LstmStep lstm_cell(Var x, Var h_prev, Var c_prev, const LstmWeights& w);

/// Runs the LSTM over every row of x from a zero state as a single fused node
/// with hand-written backpropagation through time. Returns the [T x h] hidden states.
Var lstm_sequence(Var x, const LstmWeights& w);

}  // namespace latgen
