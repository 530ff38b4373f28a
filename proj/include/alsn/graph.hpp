#pragma once

#include <span>
#include <vector>

#include "alsn/parameters.hpp"
#include "alsn/tensor.hpp"

namespace alsn {

using NodeId = int;

enum class OpKind {
  kConstant,
  kVariable,
  kParameter,
  kConv2d,
  kUpsample,
  kRelu,
  kSigmoid,
  kAdd,
  kMaxPool2,
  kBalancedBce,
  kBalancedBceLogits,
};

// Loss clamp applied to predictions before taking logs.
inline constexpr double kBceClamp = 1e-7;

// Define-by-run tape. Every op call computes its output immediately and
// appends a node, so node order is a topological order by construction.
// A Graph is single-threaded; separate graphs share nothing mutable except
// the parameters they were explicitly handed.
template <typename T>
class Graph {
 public:
  struct Node {
    OpKind kind = OpKind::kConstant;
    std::vector<NodeId> inputs;
    int attr = 0;  // dilation for conv, factor for upsample
    Tensor<T> value;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    Buffer<T> saved;              // im2col buffer, bce targets
    std::vector<int> saved_index; // maxpool argmax
  };

  NodeId constant(Tensor<T> value);
  // A leaf whose gradient is kept after backward (used for input gradients).
  NodeId variable(Tensor<T> value);
  NodeId parameter(Parameter<T>& p);

  // Stride 1, zero padding d*(k-1)/2, so spatial size is preserved.
  NodeId conv2d(NodeId input, NodeId weight, NodeId bias, int dilation);
  // Bilinear, align-corners-false.
  NodeId upsample_bilinear(NodeId input, int factor);
  NodeId relu(NodeId input);
  NodeId sigmoid(NodeId input);
  NodeId add(NodeId a, NodeId b);
  NodeId add_n(std::span<const NodeId> terms);
  NodeId maxpool2(NodeId input);
  // Class-balanced cross-entropy, mean over pixels: positives weigh
  // #negatives / N, negatives the rest. A single-class target falls back to
  // unit weights. Returns a scalar node.
  NodeId balanced_bce(NodeId pred, const Tensor<T>& target);
  // Same value as balanced_bce(sigmoid(logits), target). The gradient is
  // taken in logit form and stays nonzero where the sigmoid saturates.
  NodeId balanced_bce_logits(NodeId logits, const Tensor<T>& target);

  // Fills gradients of every node reachable from `loss` and accumulates into
  // the parameters' grad buffers.
  void backward(NodeId loss);

  const Tensor<T>& value(NodeId id) const { return node(id).value; }
  const Buffer<T>& grad(NodeId id) const { return node(id).value.grad; }
  T scalar(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeId id) const;

 private:
  Node& mut(NodeId id);
  NodeId push(Node n);
  Buffer<T>& ensure_grad(Node& n);

  void backward_conv2d(Node& n);
  void backward_upsample(Node& n);
  void backward_maxpool(Node& n);
  void backward_bce(Node& n);
  void backward_bce_logits(Node& n);
  NodeId bce_node(OpKind kind, NodeId input, const Buffer<T>& probs, const Tensor<T>& target);

  std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace alsn
