#pragma once

// Minimal reverse-mode automatic differentiation over dense tensors.
//
// A Graph is a tape: every op appends a node whose inputs were created
// earlier, so construction order is a topological order and backward() walks
// it in reverse. Graphs are rebuilt for each training step; persistent
// parameters live in the networks and are bound into a fresh graph as leaves.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace satrefine::ad {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

/// Row-major dense array. Values are held in double precision.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  /// Rank-0 tensor holding one value.
  static Tensor scalar(double value);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// The single value of a one-element tensor.
  double item() const;
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

enum class OpKind {
  leaf,
  add,
  sub,
  mul,
  matmul,
  conv2d,
  leaky_relu,
  sigmoid,
  tanh,
  log,
  abs,
  sum,
  mean,
  pad,
  clamp01,
};

const char* op_name(OpKind kind);

/// Reduction extent for sum/mean: everything, or all axes but the first.
enum class Reduce { all, per_sample };

struct Conv2dAttrs {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// Attributes for the generic `forward_op` entry point; each op reads only
/// the fields it needs.
struct OpAttrs {
  Conv2dAttrs conv;
  double slope = 0.2;
  std::size_t pad = 1;
  Reduce reduce = Reduce::all;
};

/// Lower bound applied inside `log`.
inline constexpr double kLogFloor = 1e-12;

class Graph;

/// Handle to a node of a Graph.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Graph* graph() const noexcept { return graph_; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradients produced by Graph::backward, indexed by node.
class Gradients {
 public:
  /// Gradient of the loss with respect to `v`. Parameters the loss does not
  /// depend on have an all-zero gradient.
  const Tensor& operator[](Var v) const;

 private:
  friend class Graph;
  std::vector<Tensor> grads_;
  std::vector<bool> available_;
};

class Graph {
 public:
  /// Per-node reverse pass: accumulate into each non-null input gradient.
  struct BackwardArgs {
    const Tensor& grad_out;
    const Tensor& out;
    std::span<const Tensor* const> inputs;
    std::span<Tensor* const> input_grads;
  };
  using BackwardFn = std::function<void(const BackwardArgs&)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var parameter(Tensor value);

  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<Var>& parameters() const noexcept { return parameters_; }
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  OpKind kind(std::size_t id) const { return nodes_.at(id).kind; }
  const std::vector<std::size_t>& inputs(std::size_t id) const {
    return nodes_.at(id).inputs;
  }

  /// Reverse-mode sweep from a one-element loss node.
  Gradients backward(Var loss) const;

  /// Appends an op node. Used by the op functions below.
  Var record(OpKind kind, Tensor value, std::span<const Var> inputs,
             BackwardFn backward);

 private:
  struct Node {
    OpKind kind = OpKind::leaf;
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_parameter = false;
  };

  Var leaf(Tensor value, bool is_parameter);

  std::vector<Node> nodes_;
  std::vector<Var> parameters_;
};

// Element-wise ops accept equal shapes, or one operand with a single element
// broadcast over the other.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add(Var a, double b);
Var sub(double a, Var b);
Var mul(Var a, double b);

/// [m,k] × [k,n] → [m,n].
Var matmul(Var a, Var b);

/// Cross-correlation of NCHW input with OIHW weight, symmetric zero padding.
Var conv2d(Var input, Var weight, Conv2dAttrs attrs);
Var conv2d(Var input, Var weight, Var bias, Conv2dAttrs attrs);

Var leaky_relu(Var x, double slope);
Var sigmoid(Var x);
Var tanh(Var x);
/// log(max(x, kLogFloor)); zero derivative below the floor.
Var log(Var x);
Var abs(Var x);
Var sum(Var x, Reduce reduce = Reduce::all);
Var mean(Var x, Reduce reduce = Reduce::all);
/// Zero-pads the two trailing (spatial) axes of an NCHW tensor by `amount`.
Var pad(Var x, std::size_t amount);
/// Clamps into [0,1]; subgradient 0 outside the open interval.
Var clamp01(Var x);

/// Dispatches on `kind` for generic callers (tests, tooling).
Var forward_op(OpKind kind, std::span<const Var> inputs, const OpAttrs& attrs = {});

}  // namespace satrefine::ad
