#pragma once

#include <array>
#include <string>
#include <vector>

#include "rlinrl/rng.hpp"
#include "rlinrl/tape.hpp"
#include "rlinrl/tensor.hpp"

namespace rlinrl {

enum class LayerKind { dense, conv2d, relu, sigmoid, thresholded_relu, flatten, upsample2d };

const char* layer_kind_name(LayerKind k);

struct LayerSpec {
  LayerKind kind;
  int in = 0, out = 0;        // dense widths / conv channels
  int k = 3, stride = 1, pad = 1;
  int factor = 2;             // upsample2d
  float beta = 0.0f;          // thresholded_relu, in [0,1)

  static LayerSpec Dense(int in, int out);
  static LayerSpec Conv(int in, int out, int k = 3, int stride = 1, int pad = 1);
  static LayerSpec Relu();
  static LayerSpec Sigmoid();
  static LayerSpec ThresholdedRelu(float beta);
  static LayerSpec Flatten();
  static LayerSpec Upsample(int factor);
};

// An ordered layer stack with its parameters. Weights are fan-in-scaled
// uniform, biases zero; layout: dense w[out,in], conv w[out, k*k*in] with the
// patch in (ky,kx,ci) order.
class Network {
 public:
  Network() = default;
  Network(std::vector<LayerSpec> layers, const std::string& name_prefix, Rng& rng);

  NodeId forward(Tape& t, NodeId x);
  Tensor forward_value(const Tensor& x);  // throwaway tape

  std::vector<LayerSpec>& layers() { return layers_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  // Parameter indices {w,b} for layer i, or {-1,-1}.
  std::array<int, 2> param_indices(std::size_t layer) const { return pidx_[layer]; }

  void set_trainable(bool flag);

 private:
  std::vector<LayerSpec> layers_;
  std::vector<Param> params_;
  std::vector<std::array<int, 2>> pidx_;
};

struct GradCheckReport {
  float max_rel_err = 0.0f;
  bool at_kink = false;       // some unit sat within the kink window; excluded from pass/fail
  int worst_param = -1;
  std::int64_t worst_index = -1;
};

// Central-difference check of tape gradients, parameter by parameter, against
// the scalar loss mean(forward(x)). Independent of the backward pass.
// backward_fault scales the tape gradients before comparison; values != 1
// simulate a wrong backward pass (test fixture for the checker itself).
GradCheckReport grad_check(Network& net, const Tensor& input, float eps,
                           float backward_fault = 1.0f);

}  // namespace rlinrl
