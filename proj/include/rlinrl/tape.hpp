#pragma once
// Reverse-mode autodiff over a per-forward-pass tape. A Tape belongs to one
// training context at a time; build the graph, call backward on a scalar
// output, then read parameter grads (flushed into Param::grad).

#include <cstdint>
#include <functional>
#include <vector>

#include "rlinrl/tensor.hpp"

namespace rlinrl {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

class Tape {
 public:
  // Leaves.
  NodeId leaf(Tensor t, bool needs_grad = false);
  NodeId param(Param& p);  // grads flow back into p.grad on backward()

  // Linear algebra / layers.
  NodeId dense(NodeId x, NodeId w, NodeId b);                    // [N,I]x[O,I]+[O] -> [N,O]
  NodeId conv2d(NodeId x, NodeId w, NodeId b, int kh, int kw, int stride, int pad);
  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId thresholded_relu(NodeId x, float beta);                 // max(0, (x-b)/(1-b))
  NodeId reshape(NodeId x, std::vector<int> shape);
  NodeId upsample2d(NodeId x, int factor);                       // nearest neighbor
  NodeId concat_channels(NodeId a, NodeId b);                    // [N,H,W,Ca]+[N,H,W,Cb]

  // Elementwise.
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId add_scalar(NodeId x, float s);
  NodeId mul_scalar(NodeId x, float s);
  NodeId square(NodeId x);
  NodeId exp(NodeId x);
  NodeId clamp(NodeId x, float lo, float hi);
  NodeId min(NodeId a, NodeId b);
  NodeId mask_mul(NodeId x, NodeId m);                           // m broadcast over channels

  // Reductions.
  NodeId sum(NodeId x);                                          // -> [1]
  NodeId mean(NodeId x);                                         // -> [1]
  NodeId sum_abs(NodeId x);                                      // -> [1]
  NodeId at_index(NodeId x, std::int64_t flat);                  // -> [1]

  // Policy-head log densities.
  NodeId logp_discrete(NodeId logits, const std::vector<int>& actions);        // -> [N]
  NodeId entropy_discrete(NodeId logits);                                      // -> [N]
  NodeId gauss_logp(NodeId mean, NodeId logstd, const Tensor& actions);        // -> [N]

  void backward(NodeId out);  // out must be a [1] scalar

  const Tensor& val(NodeId id) const { return nodes_[check(id)].val; }
  const std::vector<float>& grad(NodeId id) const;
  bool needs_grad(NodeId id) const { return nodes_[check(id)].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor val;
    std::vector<float> grad;  // allocated during backward
    bool needs_grad = false;
    std::function<void(Tape&, NodeId)> back;  // accumulate into parents
  };

  NodeId push(Tensor val, bool needs_grad, std::function<void(Tape&, NodeId)> back);
  NodeId check(NodeId id) const;
  float* grad_buf(NodeId id);          // lazily zero-allocated
  void accum(NodeId id, const float* g, std::size_t n);

  std::vector<Node> nodes_;
  std::vector<std::pair<NodeId, Param*>> param_links_;
};

}  // namespace rlinrl
