#include "rlinrl/mask.hpp"

#include "rlinrl/serialize.hpp"

namespace rlinrl {

MaskNetwork::MaskNetwork(PolicyNetwork& pre, float beta, Rng& rng)
    : h_(pre.obs_h()), w_(pre.obs_w()), c_(pre.obs_c()), beta_(beta) {
  if (beta < 0.0f || beta >= 1.0f) throw ConfigError("mask beta must lie in [0,1)");
  if (h_ % 4 != 0 || w_ % 4 != 0)
    throw ConfigError("mask network needs h, w divisible by 4");

  Rng r1 = rng.split(1), r2 = rng.split(2), r3 = rng.split(3), r4 = rng.split(4), r5 = rng.split(5);
  enc1_ = Network({LayerSpec::Conv(c_, 8, 3, 2, 1), LayerSpec::Relu()}, "mask.enc1", r1);
  enc2_ = Network({LayerSpec::Conv(8, 16, 3, 2, 1), LayerSpec::Relu()}, "mask.enc2", r2);
  dec1_ = Network({LayerSpec::Conv(16, 16, 3, 1, 1), LayerSpec::Relu(), LayerSpec::Upsample(2)},
                  "mask.dec1", r3);
  dec2_ = Network({LayerSpec::Conv(16 + 8, 8, 3, 1, 1), LayerSpec::Relu(), LayerSpec::Upsample(2)},
                  "mask.dec2", r4);
  dec3_ = Network({LayerSpec::Conv(8 + c_, 8, 3, 1, 1), LayerSpec::Relu(),
                   LayerSpec::Conv(8, 1, 3, 1, 1)},
                  "mask.dec3", r5);

  // Shared extractor: pi_pre's conv stages are layers 0 and 2 of its
  // extractor; copy their weights into the encoder.
  auto copy_into = [](Network& dst, Network& src_net, std::size_t src_layer) {
    auto si = src_net.param_indices(src_layer);
    auto di = dst.param_indices(0);
    for (int k = 0; k < 2; ++k) {
      Param& s = src_net.params()[static_cast<std::size_t>(si[static_cast<std::size_t>(k)])];
      Param& d = dst.params()[static_cast<std::size_t>(di[static_cast<std::size_t>(k)])];
      if (s.value.shape != d.value.shape)
        throw IntegrityError("extractor/encoder shape mismatch at " + s.name);
      d.value = s.value;
    }
  };
  copy_into(enc1_, pre.extractor(), 0);
  copy_into(enc2_, pre.extractor(), 2);

  // Bias the final conv so the untrained mask starts nearly all-pass
  // (sigmoid(3) is about 0.95); training then carves features away instead of
  // having to discover them.
  auto bi = dec3_.param_indices(2);
  dec3_.params()[static_cast<std::size_t>(bi[1])].value.v[0] = 3.0f;
}

NodeId MaskNetwork::mask_node(Tape& t, NodeId x) {
  NodeId e1 = enc1_.forward(t, x);
  NodeId e2 = enc2_.forward(t, e1);
  NodeId u1 = dec1_.forward(t, e2);
  NodeId u2 = dec2_.forward(t, t.concat_channels(u1, e1));
  NodeId out = dec3_.forward(t, t.concat_channels(u2, x));
  return t.thresholded_relu(t.sigmoid(out), beta_);
}

Tensor MaskNetwork::compute_mask(const Tensor& s) {
  Tape t;
  return t.val(mask_node(t, t.leaf(s)));
}

std::vector<Param*> MaskNetwork::encoder_params() {
  std::vector<Param*> ps;
  for (Network* n : {&enc1_, &enc2_})
    for (Param& p : n->params()) ps.push_back(&p);
  return ps;
}

std::vector<Param*> MaskNetwork::decoder_params() {
  std::vector<Param*> ps;
  for (Network* n : {&dec1_, &dec2_, &dec3_})
    for (Param& p : n->params()) ps.push_back(&p);
  return ps;
}

std::vector<Param*> MaskNetwork::all_params() {
  std::vector<Param*> ps = encoder_params();
  for (Param* p : decoder_params()) ps.push_back(p);
  return ps;
}

void MaskNetwork::freeze_encoder() {
  for (Param* p : encoder_params()) p->trainable = false;
}

void MaskNetwork::save(const std::string& path) {
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (Param* p : all_params()) tensors.emplace_back(p->name, &p->value);
  save_params_file(path, tensors);
}

void MaskNetwork::load(const std::string& path) {
  auto named = load_params_file(path);
  for (Param* p : all_params()) {
    auto it = named.find(p->name);
    if (it == named.end()) throw IntegrityError("checkpoint missing tensor " + p->name);
    if (it->second.shape != p->value.shape)
      throw IntegrityError("checkpoint shape mismatch for " + p->name);
    p->value = it->second;
  }
}

Tensor attentive_state(const Tensor& s, const Tensor& m) {
  if (s.shape.size() != 4 || m.shape.size() != 4 || m.shape[3] != 1 || s.shape[0] != m.shape[0] ||
      s.shape[1] != m.shape[1] || s.shape[2] != m.shape[2])
    throw UsageError("attentive_state: mask must be [N,H,W,1] matching the state");
  Tensor out = s;
  int hw = s.shape[1] * s.shape[2];
  int ch = s.shape[3];
  for (int n = 0; n < s.shape[0]; ++n)
    for (int i = 0; i < hw; ++i) {
      float mv = m.v[static_cast<std::size_t>(n * hw + i)];
      for (int c = 0; c < ch; ++c) out.v[static_cast<std::size_t>((n * hw + i) * ch + c)] *= mv;
    }
  return out;
}

float sparsity_l1(const Tensor& m) {
  float s = 0.0f;
  for (float v : m.v) s += std::fabs(v);
  return s;
}

float sparsity_mean(const Tensor& m) {
  if (m.shape.size() != 4) throw UsageError("sparsity_mean expects [N,H,W,1]");
  return sparsity_l1(m) / static_cast<float>(m.shape[0] * m.shape[1] * m.shape[2]);
}

}  // namespace rlinrl
