#include "histmix/graph.h"

#include "histmix/errors.h"

namespace histmix {

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, std::nullopt, nullptr, false});
  return Var{nodes_.size() - 1};
}

Var Graph::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, std::nullopt, nullptr, true});
  return Var{nodes_.size() - 1};
}

Var Graph::parameter(Parameter& p) {
  if (p.grad.shape() != p.value.shape()) {
    throw DimensionError("parameter gradient shape " + shape_str(p.grad.shape()) +
                         " differs from value shape " + shape_str(p.value.shape()));
  }
  nodes_.push_back(Node{p.value, {}, {}, std::nullopt, &p, true});
  return Var{nodes_.size() - 1};
}

const Graph::Node& Graph::node(Var v) const {
  if (v.id >= nodes_.size()) throw ContractError("variable does not belong to this graph");
  return nodes_[v.id];
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

Tensor Graph::grad(Var v) const {
  const Node& n = node(v);
  return n.grad ? *n.grad : Tensor::zeros_like(n.value);
}

Var Graph::record(Tensor value, std::vector<Var> inputs, BackwardFn fn) {
  bool rg = false;
  for (Var in : inputs) rg = rg || node(in).requires_grad;
  nodes_.push_back(Node{std::move(value), std::move(inputs), rg ? std::move(fn) : BackwardFn{},
                        std::nullopt, nullptr, rg});
  return Var{nodes_.size() - 1};
}

Tensor& Graph::grad_buffer(Var v) {
  Node& n = nodes_.at(v.id);
  if (!n.grad) n.grad = Tensor::zeros_like(n.value);
  return *n.grad;
}

void Graph::accumulate(Var v, const Tensor& g) {
  if (!node(v).requires_grad) return;
  grad_buffer(v) += g;
}

void Graph::backward(Var loss) {
  if (!node(loss).value.is_scalar()) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        shape_str(node(loss).value.shape()));
  }
  for (Node& n : nodes_) n.grad.reset();
  if (!nodes_[loss.id].requires_grad) return;
  grad_buffer(loss).fill(1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.grad) continue;
    // Callbacks only write into their inputs' buffers, which precede node i.
    if (n.backward) n.backward(*this, *n.grad);
    if (n.param) n.param->grad += *n.grad;
  }
}

}  // namespace histmix
