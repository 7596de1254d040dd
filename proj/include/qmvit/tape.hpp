#pragma once

#include <functional>
#include <vector>

#include "qmvit/nn.hpp"
#include "qmvit/tensor.hpp"

namespace qmvit {

// Eager reverse-mode tape. Nodes are created in topological order, so the
// backward sweep is a single reverse walk. Closures receive the tape by
// reference and address parents by id; they must not keep raw pointers into
// the node vector (it reallocates as the graph grows).
class Tape {
 public:
  using NodeId = int;
  using BackwardFn =
      std::function<void(Tape& t, const Tensor& upstream, const std::vector<NodeId>& parents)>;

  NodeId leaf(Tensor value, bool requires_grad = false);

  const Tensor& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  const Tensor& grad(NodeId id) const;  // zeros if the sweep never reached it

  // seeds d(root)/d(root) = 1 (root must be scalar) and sweeps backward
  void backward(NodeId root);

  // called by backward closures; silently skips constants
  void accumulate(NodeId id, const Tensor& g);

  // arbitrary op with a custom pullback
  NodeId custom(std::vector<NodeId> parents, Tensor value, BackwardFn back);

  NodeId add(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId matmul_op(NodeId a, NodeId b);
  // rows of x through x W + b
  NodeId linear(NodeId x, NodeId w, NodeId b);
  NodeId row_softmax_op(NodeId x);
  NodeId layer_norm_op(NodeId x, NodeId gamma, NodeId beta);
  NodeId gelu_op(NodeId x);
  NodeId relu_op(NodeId x);
  NodeId tanh_pi_op(NodeId x);
  // softmax(Q K^T / sqrt(d_k)) V; q,k: (S,d), v: (S,dv)
  NodeId classical_attention_op(NodeId q, NodeId k, NodeId v);
  NodeId conv2d_op(NodeId x, NodeId w, NodeId b, int stride);
  NodeId reshape(NodeId x, std::vector<int> shape);
  NodeId concat_cols(const std::vector<NodeId>& parts);
  NodeId slice_cols(NodeId x, int start, int len);
  NodeId prepend_row(NodeId row, NodeId rest);  // row: (D), rest: (S,D) -> (S+1,D)
  NodeId take_row(NodeId x, int row);           // (S,D) -> (D)
  NodeId global_average_pool_op(NodeId x);      // (H,W,C) -> (C)
  NodeId cross_entropy_op(NodeId logits, int label);  // logits (C) -> scalar loss

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool seen = false;  // grad has been accumulated at least once
    std::vector<NodeId> parents;
    BackwardFn back;
  };

  Node& node(NodeId id) { return nodes_[static_cast<std::size_t>(id)]; }
  bool any_requires(const std::vector<NodeId>& ids) const;

  std::vector<Node> nodes_;
};

}  // namespace qmvit
