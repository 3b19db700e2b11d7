#pragma once
// Mask network: encoder initialized from the pretrained policy's conv
// extractor, U-style decoder with skip connections, sigmoid output squashed
// through a thresholded relu dead zone.

#include "rlinrl/policy.hpp"

namespace rlinrl {

class MaskNetwork {
 public:
  MaskNetwork() = default;
  // Copies the conv parameters of pre's extractor into the encoder.
  MaskNetwork(PolicyNetwork& pre, float beta, Rng& rng);

  NodeId mask_node(Tape& t, NodeId x);     // [N,H,W,C] -> [N,H,W,1]
  Tensor compute_mask(const Tensor& s);
  float beta() const { return beta_; }
  int obs_h() const { return h_; }
  int obs_w() const { return w_; }
  int obs_c() const { return c_; }

  std::vector<Param*> encoder_params();
  std::vector<Param*> decoder_params();
  std::vector<Param*> all_params();
  void freeze_encoder();

  void save(const std::string& path);
  void load(const std::string& path);

 private:
  int h_ = 0, w_ = 0, c_ = 0;
  float beta_ = 0.0f;
  Network enc1_, enc2_;       // conv s2 stages shared with pi_pre
  Network dec1_, dec2_, dec3_;
};

// s element-multiplied by m broadcast over channels (value-level helper; the
// tape op mask_mul is the differentiable path).
Tensor attentive_state(const Tensor& s, const Tensor& m);

float sparsity_l1(const Tensor& m);
float sparsity_mean(const Tensor& m);  // l1 / (H*W)

}  // namespace rlinrl
