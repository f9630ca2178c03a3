#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "histmix/tensor.h"

namespace histmix {

// Trainable tensor with a gradient buffer of identical shape.
struct Parameter {
  Tensor value;
  Tensor grad;

  Parameter() = default;
  explicit Parameter(Tensor v) : value(std::move(v)), grad(Tensor::zeros_like(value)) {}

  void zero_grad() { grad.fill(0.0); }
};

// Handle to a node inside one Graph.
struct Var {
  std::size_t id = 0;
};

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order,
/// so every node's inputs precede it and a single reverse sweep visits each
/// node once. A graph is built per forward pass and discarded afterwards.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Leaf that requires grad; its gradient is readable through grad().
  Var variable(Tensor value);
  // Leaf bound to a Parameter; backward() adds into `p.grad`. The parameter
  // must outlive the call to backward().
  Var parameter(Parameter& p);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  // Gradient of the last backward() loss w.r.t. `v`; zeros if it did not flow.
  Tensor grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  // Backpropagate from a scalar node. Throws ContractError if `loss` is not scalar.
  void backward(Var loss);

  // ---- op implementer interface ----
  // Appends a node. `fn` is kept only when some input requires grad.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn fn);
  // Adds `g` into the gradient of `v`; no-op when `v` does not require grad.
  void accumulate(Var v, const Tensor& g);
  // Mutable gradient buffer, zero-initialised on first use.
  Tensor& grad_buffer(Var v);

 private:
  struct Node {
    Tensor value;
    std::vector<Var> inputs;
    BackwardFn backward;
    std::optional<Tensor> grad;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  const Node& node(Var v) const;
  std::vector<Node> nodes_;
};

}  // namespace histmix
