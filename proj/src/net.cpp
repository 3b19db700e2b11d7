#include "rlinrl/net.hpp"

#include <cmath>

namespace rlinrl {

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::thresholded_relu: return "thresholded_relu";
    case LayerKind::flatten: return "flatten";
    case LayerKind::upsample2d: return "upsample2d";
  }
  return "?";
}

LayerSpec LayerSpec::Dense(int in, int out) {
  LayerSpec s{LayerKind::dense};
  s.in = in;
  s.out = out;
  return s;
}
LayerSpec LayerSpec::Conv(int in, int out, int k, int stride, int pad) {
  LayerSpec s{LayerKind::conv2d};
  s.in = in;
  s.out = out;
  s.k = k;
  s.stride = stride;
  s.pad = pad;
  return s;
}
LayerSpec LayerSpec::Relu() { return LayerSpec{LayerKind::relu}; }
LayerSpec LayerSpec::Sigmoid() { return LayerSpec{LayerKind::sigmoid}; }
LayerSpec LayerSpec::ThresholdedRelu(float beta) {
  if (beta < 0.0f || beta >= 1.0f)
    throw ConfigError("thresholded_relu: beta must lie in [0,1), got " + std::to_string(beta));
  LayerSpec s{LayerKind::thresholded_relu};
  s.beta = beta;
  return s;
}
LayerSpec LayerSpec::Flatten() { return LayerSpec{LayerKind::flatten}; }
LayerSpec LayerSpec::Upsample(int factor) {
  LayerSpec s{LayerKind::upsample2d};
  s.factor = factor;
  return s;
}

static Tensor init_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  const float s = 1.0f / std::sqrt(static_cast<float>(fan_in));
  for (float& v : t.v) v = rng.uniform(-s, s);
  return t;
}

Network::Network(std::vector<LayerSpec> layers, const std::string& prefix, Rng& rng)
    : layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = layers_[i];
    std::string base = prefix + ".l" + std::to_string(i);
    switch (l.kind) {
      case LayerKind::dense: {
        pidx_.push_back({static_cast<int>(params_.size()), static_cast<int>(params_.size()) + 1});
        params_.emplace_back(base + ".w", init_uniform({l.out, l.in}, l.in, rng));
        params_.emplace_back(base + ".b", Tensor::zeros({l.out}));
        break;
      }
      case LayerKind::conv2d: {
        int fan = l.k * l.k * l.in;
        pidx_.push_back({static_cast<int>(params_.size()), static_cast<int>(params_.size()) + 1});
        params_.emplace_back(base + ".w", init_uniform({l.out, fan}, fan, rng));
        params_.emplace_back(base + ".b", Tensor::zeros({l.out}));
        break;
      }
      default:
        pidx_.push_back({-1, -1});
        break;
    }
  }
}

NodeId Tape_forward_layer(Tape& t, NodeId x, const LayerSpec& l, Param* w, Param* b) {
  switch (l.kind) {
    case LayerKind::dense:
      return t.dense(x, t.param(*w), t.param(*b));
    case LayerKind::conv2d:
      return t.conv2d(x, t.param(*w), t.param(*b), l.k, l.k, l.stride, l.pad);
    case LayerKind::relu:
      return t.relu(x);
    case LayerKind::sigmoid:
      return t.sigmoid(x);
    case LayerKind::thresholded_relu:
      return t.thresholded_relu(x, l.beta);
    case LayerKind::flatten: {
      const auto& s = t.val(x).shape;
      if (s.size() == 2) return x;
      int n = s[0];
      int rest = 1;
      for (std::size_t i = 1; i < s.size(); ++i) rest *= s[i];
      return t.reshape(x, {n, rest});
    }
    case LayerKind::upsample2d:
      return t.upsample2d(x, l.factor);
  }
  throw UsageError("unknown layer kind");
}

NodeId Network::forward(Tape& t, NodeId x) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = layers_[i];
    Param* w = pidx_[i][0] >= 0 ? &params_[pidx_[i][0]] : nullptr;
    Param* b = pidx_[i][1] >= 0 ? &params_[pidx_[i][1]] : nullptr;
    try {
      x = Tape_forward_layer(t, x, l, w, b);
    } catch (const UsageError& e) {
      throw UsageError("layer " + std::to_string(i) + " (" + layer_kind_name(l.kind) +
                       "): " + e.what());
    }
  }
  return x;
}

Tensor Network::forward_value(const Tensor& x) {
  Tape t;
  NodeId out = forward(t, t.leaf(x));
  return t.val(out);
}

void Network::set_trainable(bool flag) {
  for (Param& p : params_) p.trainable = flag;
}

GradCheckReport grad_check(Network& net, const Tensor& input, float eps, float backward_fault) {
  if (eps <= 0.0f) throw ConfigError("grad_check: eps must be positive");
  GradCheckReport rep;

  // Tape gradients of mean(output).
  for (Param& p : net.params()) p.zero_grad();
  {
    Tape t;
    NodeId out = net.forward(t, t.leaf(input));
    t.backward(t.mean(out));
  }
  if (backward_fault != 1.0f)
    for (Param& p : net.params())
      for (float& g : p.grad.v) g *= backward_fault;

  // Kink proximity: any relu/thresholded-relu pre-activation near its
  // threshold makes the finite-difference estimate unreliable there.
  const float window = 5.0f * eps;
  {
    Tape t;
    std::vector<NodeId> per_layer;
    NodeId x = t.leaf(input);
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
      const LayerSpec& l = net.layers()[i];
      if (l.kind == LayerKind::relu || l.kind == LayerKind::thresholded_relu) {
        float thr = l.kind == LayerKind::relu ? 0.0f : l.beta;
        for (float v : t.val(x).v)
          if (std::fabs(v - thr) < window) rep.at_kink = true;
      }
      Param* w = net.param_indices(i)[0] >= 0 ? &net.params()[net.param_indices(i)[0]] : nullptr;
      Param* b = net.param_indices(i)[1] >= 0 ? &net.params()[net.param_indices(i)[1]] : nullptr;
      x = Tape_forward_layer(t, x, l, w, b);
    }
  }

  auto loss = [&]() {
    Tensor out = net.forward_value(input);
    double s = 0.0;
    for (float v : out.v) s += v;
    return static_cast<float>(s / static_cast<double>(out.v.size()));
  };

  // Vector-level comparison: worst absolute discrepancy normalized by the
  // gradient's overall scale. Coordinate-wise ratios amplify float32
  // quadrature noise on entries whose true gradient is tiny.
  std::vector<std::vector<float>> fd(net.params().size());
  float scale = 1e-4f;
  for (std::size_t pi = 0; pi < net.params().size(); ++pi) {
    Param& p = net.params()[pi];
    fd[pi].resize(p.value.v.size());
    for (std::size_t j = 0; j < p.value.v.size(); ++j) {
      float orig = p.value.v[j];
      p.value.v[j] = orig + eps;
      float fp = loss();
      p.value.v[j] = orig - eps;
      float fm = loss();
      p.value.v[j] = orig;
      fd[pi][j] = (fp - fm) / (2.0f * eps);
      scale = std::max({scale, std::fabs(fd[pi][j]), std::fabs(p.grad.v[j])});
    }
  }
  for (std::size_t pi = 0; pi < net.params().size(); ++pi) {
    Param& p = net.params()[pi];
    for (std::size_t j = 0; j < fd[pi].size(); ++j) {
      float rel = std::fabs(fd[pi][j] - p.grad.v[j]) / scale;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = static_cast<int>(pi);
        rep.worst_index = static_cast<std::int64_t>(j);
      }
    }
  }
  return rep;
}

}  // namespace rlinrl
