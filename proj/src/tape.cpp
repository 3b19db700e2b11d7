#include "rlinrl/tape.hpp"

#include <cmath>

#include "rlinrl/kernels.hpp"

namespace rlinrl {

NodeId Tape::push(Tensor val, bool needs_grad, std::function<void(Tape&, NodeId)> back) {
  nodes_.push_back(Node{std::move(val), {}, needs_grad, std::move(back)});
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::check(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw UsageError("tape: invalid node id");
  return id;
}

float* Tape::grad_buf(NodeId id) {
  Node& n = nodes_[check(id)];
  if (n.grad.empty()) n.grad.assign(n.val.v.size(), 0.0f);
  return n.grad.data();
}

void Tape::accum(NodeId id, const float* g, std::size_t n) {
  kern::axpy(1.0f, g, grad_buf(id), n);
}

const std::vector<float>& Tape::grad(NodeId id) const {
  const Node& n = nodes_[check(id)];
  if (n.grad.empty()) throw UsageError("tape: gradient not populated; run backward first");
  return n.grad;
}

NodeId Tape::leaf(Tensor t, bool needs_grad) {
  return push(std::move(t), needs_grad, nullptr);
}

NodeId Tape::param(Param& p) {
  NodeId id = push(p.value, p.trainable, nullptr);
  if (p.trainable) param_links_.emplace_back(id, &p);
  return id;
}

// ---------------------------------------------------------------------------

NodeId Tape::dense(NodeId xi, NodeId wi, NodeId bi) {
  const Tensor& x = val(xi);
  const Tensor& w = val(wi);
  const Tensor& b = val(bi);
  if (x.shape.size() != 2 || w.shape.size() != 2 || b.shape.size() != 1)
    throw UsageError("dense: expected x[N,I], w[O,I], b[O]");
  const int n = x.shape[0], in = x.shape[1], out = w.shape[0];
  if (w.shape[1] != in || b.shape[0] != out)
    throw UsageError("dense: dimension mismatch (in=" + std::to_string(in) +
                     ", w=[" + std::to_string(w.shape[0]) + "," + std::to_string(w.shape[1]) + "])");
  Tensor y = Tensor::zeros({n, out});
  for (int r = 0; r < n; ++r)
    for (int o = 0; o < out; ++o)
      y.v[r * out + o] = kern::dot(&x.v[r * in], &w.v[o * in], in) + b.v[o];

  bool ng = needs_grad(xi) || needs_grad(wi) || needs_grad(bi);
  return push(std::move(y), ng, [xi, wi, bi, n, in, out](Tape& t, NodeId self) {
    const auto& go = t.nodes_[self].grad;
    const Tensor& x = t.val(xi);
    const Tensor& w = t.val(wi);
    float* gx = t.needs_grad(xi) ? t.grad_buf(xi) : nullptr;
    float* gw = t.needs_grad(wi) ? t.grad_buf(wi) : nullptr;
    float* gb = t.needs_grad(bi) ? t.grad_buf(bi) : nullptr;
    for (int r = 0; r < n; ++r)
      for (int o = 0; o < out; ++o) {
        float g = go[r * out + o];
        if (g == 0.0f) continue;
        if (gx) kern::axpy(g, &w.v[o * in], &gx[r * in], in);
        if (gw) kern::axpy(g, &x.v[r * in], &gw[o * in], in);
        if (gb) gb[o] += g;
      }
  });
}

NodeId Tape::conv2d(NodeId xi, NodeId wi, NodeId bi, int kh, int kw, int stride, int pad) {
  const Tensor& x = val(xi);
  const Tensor& w = val(wi);
  const Tensor& b = val(bi);
  if (x.shape.size() != 4) throw UsageError("conv2d: expected x[N,H,W,C]");
  const int n = x.shape[0], h = x.shape[1], ww_ = x.shape[2], ci = x.shape[3];
  const int patch = kh * kw * ci;
  if (w.shape.size() != 2 || w.shape[1] != patch)
    throw UsageError("conv2d: weight must be [Cout," + std::to_string(patch) + "], got [" +
                     std::to_string(w.shape[0]) + "," + std::to_string(w.shape[1]) + "]");
  const int co = w.shape[0];
  if (b.shape.size() != 1 || b.shape[0] != co) throw UsageError("conv2d: bias mismatch");
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (ww_ + 2 * pad - kw) / stride + 1;
  if (ho <= 0 || wo <= 0) throw UsageError("conv2d: output size non-positive");

  Tensor y = Tensor::zeros({n, ho, wo, co});
  std::vector<float> pbuf(static_cast<std::size_t>(patch));
  auto gather = [&](const Tensor& src, int img, int oy, int ox, float* dst) {
    std::size_t k = 0;
    for (int ky = 0; ky < kh; ++ky) {
      int sy = oy * stride - pad + ky;
      for (int kx = 0; kx < kw; ++kx) {
        int sx = ox * stride - pad + kx;
        if (sy < 0 || sy >= h || sx < 0 || sx >= ww_) {
          for (int c = 0; c < ci; ++c) dst[k++] = 0.0f;
        } else {
          const float* p = &src.v[((static_cast<std::size_t>(img) * h + sy) * ww_ + sx) * ci];
          for (int c = 0; c < ci; ++c) dst[k++] = p[c];
        }
      }
    }
  };
  for (int img = 0; img < n; ++img)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        gather(x, img, oy, ox, pbuf.data());
        float* yp = &y.v[((static_cast<std::size_t>(img) * ho + oy) * wo + ox) * co];
        for (int c = 0; c < co; ++c)
          yp[c] = kern::dot(pbuf.data(), &w.v[static_cast<std::size_t>(c) * patch], patch) + b.v[c];
      }

  bool ng = needs_grad(xi) || needs_grad(wi) || needs_grad(bi);
  return push(std::move(y), ng,
              [xi, wi, bi, kh, kw, stride, pad, n, h, ww_, ci, co, ho, wo, patch](Tape& t, NodeId self) {
    const auto& go = t.nodes_[self].grad;
    const Tensor& x = t.val(xi);
    const Tensor& w = t.val(wi);
    float* gx = t.needs_grad(xi) ? t.grad_buf(xi) : nullptr;
    float* gw = t.needs_grad(wi) ? t.grad_buf(wi) : nullptr;
    float* gb = t.needs_grad(bi) ? t.grad_buf(bi) : nullptr;
    std::vector<float> pbuf(static_cast<std::size_t>(patch));
    std::vector<float> gpatch(static_cast<std::size_t>(patch));
    for (int img = 0; img < n; ++img)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          const float* gyp = &go[((static_cast<std::size_t>(img) * ho + oy) * wo + ox) * co];
          if (gw) {
            std::size_t k = 0;
            for (int ky = 0; ky < kh; ++ky) {
              int sy = oy * stride - pad + ky;
              for (int kx = 0; kx < kw; ++kx) {
                int sx = ox * stride - pad + kx;
                if (sy < 0 || sy >= h || sx < 0 || sx >= ww_) {
                  for (int c = 0; c < ci; ++c) pbuf[k++] = 0.0f;
                } else {
                  const float* p = &x.v[((static_cast<std::size_t>(img) * h + sy) * ww_ + sx) * ci];
                  for (int c = 0; c < ci; ++c) pbuf[k++] = p[c];
                }
              }
            }
          }
          if (gx) std::fill(gpatch.begin(), gpatch.end(), 0.0f);
          for (int c = 0; c < co; ++c) {
            float g = gyp[c];
            if (g == 0.0f) continue;
            if (gw) kern::axpy(g, pbuf.data(), &gw[static_cast<std::size_t>(c) * patch], patch);
            if (gx) kern::axpy(g, &w.v[static_cast<std::size_t>(c) * patch], gpatch.data(), patch);
            if (gb) gb[c] += g;
          }
          if (gx) {
            std::size_t k = 0;
            for (int ky = 0; ky < kh; ++ky) {
              int sy = oy * stride - pad + ky;
              for (int kx = 0; kx < kw; ++kx) {
                int sx = ox * stride - pad + kx;
                if (sy < 0 || sy >= h || sx < 0 || sx >= ww_) {
                  k += ci;
                } else {
                  float* p = &gx[((static_cast<std::size_t>(img) * h + sy) * ww_ + sx) * ci];
                  for (int c = 0; c < ci; ++c) p[c] += gpatch[k++];
                }
              }
            }
          }
        }
  });
}

NodeId Tape::relu(NodeId xi) {
  const Tensor& x = val(xi);
  Tensor y = Tensor::zeros(x.shape);
  kern::relu(x.data(), y.data(), x.v.size());
  return push(std::move(y), needs_grad(xi), [xi](Tape& t, NodeId self) {
    if (!t.needs_grad(xi)) return;
    const auto& go = t.nodes_[self].grad;
    const Tensor& x = t.val(xi);
    kern::relu_backward(x.data(), go.data(), t.grad_buf(xi), x.v.size());
  });
}

NodeId Tape::sigmoid(NodeId xi) {
  const Tensor& x = val(xi);
  Tensor y = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < x.v.size(); ++i)
    y.v[i] = 1.0f / (1.0f + std::exp(-x.v[i]));
  return push(std::move(y), needs_grad(xi), [xi](Tape& t, NodeId self) {
    if (!t.needs_grad(xi)) return;
    const auto& go = t.nodes_[self].grad;
    const auto& y = t.nodes_[self].val;
    float* gx = t.grad_buf(xi);
    for (std::size_t i = 0; i < y.v.size(); ++i)
      gx[i] += go[i] * y.v[i] * (1.0f - y.v[i]);
  });
}

NodeId Tape::thresholded_relu(NodeId xi, float beta) {
  if (beta < 0.0f || beta >= 1.0f)
    throw ConfigError("thresholded_relu: beta must lie in [0,1)");
  const Tensor& x = val(xi);
  const float inv = 1.0f / (1.0f - beta);
  Tensor y = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    float z = (x.v[i] - beta) * inv;
    y.v[i] = z > 0.0f ? z : 0.0f;
  }
  return push(std::move(y), needs_grad(xi), [xi, beta, inv](Tape& t, NodeId self) {
    if (!t.needs_grad(xi)) return;
    const auto& go = t.nodes_[self].grad;
    const Tensor& x = t.val(xi);
    float* gx = t.grad_buf(xi);
    for (std::size_t i = 0; i < x.v.size(); ++i)
      if (x.v[i] > beta) gx[i] += go[i] * inv;
  });
}

NodeId Tape::reshape(NodeId xi, std::vector<int> shape) {
  const Tensor& x = val(xi);
  if (Tensor::numel(shape) != x.size()) throw UsageError("reshape: element count mismatch");
  Tensor y(std::move(shape), x.v);
  return push(std::move(y), needs_grad(xi), [xi](Tape& t, NodeId self) {
    if (!t.needs_grad(xi)) return;
    const auto& go = t.nodes_[self].grad;
    t.accum(xi, go.data(), go.size());
  });
}

NodeId Tape::upsample2d(NodeId xi, int factor) {
  if (factor < 1) throw ConfigError("upsample2d: factor must be >= 1");
  const Tensor& x = val(xi);
  if (x.shape.size() != 4) throw UsageError("upsample2d: expected [N,H,W,C]");
  const int n = x.shape[0], h = x.shape[1], w = x.shape[2], c = x.shape[3];
  Tensor y = Tensor::zeros({n, h * factor, w * factor, c});
  const int hw = h * factor, ww = w * factor;
  for (int img = 0; img < n; ++img)
    for (int oy = 0; oy < hw; ++oy)
      for (int ox = 0; ox < ww; ++ox) {
        const float* src = &x.v[((static_cast<std::size_t>(img) * h + oy / factor) * w + ox / factor) * c];
        float* dst = &y.v[((static_cast<std::size_t>(img) * hw + oy) * ww + ox) * c];
        for (int ch = 0; ch < c; ++ch) dst[ch] = src[ch];
      }
  return push(std::move(y), needs_grad(xi), [xi, n, h, w, c, factor](Tape& t, NodeId self) {
    if (!t.needs_grad(xi)) return;
    const auto& go = t.nodes_[self].grad;
    float* gx = t.grad_buf(xi);
    const int hw = h * factor, ww = w * factor;
    for (int img = 0; img < n; ++img)
      for (int oy = 0; oy < hw; ++oy)
        for (int ox = 0; ox < ww; ++ox) {
          const float* g = &go[((static_cast<std::size_t>(img) * hw + oy) * ww + ox) * c];
          float* dst = &gx[((static_cast<std::size_t>(img) * h + oy / factor) * w + ox / factor) * c];
          for (int ch = 0; ch < c; ++ch) dst[ch] += g[ch];
        }
  });
}

NodeId Tape::concat_channels(NodeId ai, NodeId bi) {
  const Tensor& a = val(ai);
  const Tensor& b = val(bi);
  if (a.shape.size() != 4 || b.shape.size() != 4 || a.shape[0] != b.shape[0] ||
      a.shape[1] != b.shape[1] || a.shape[2] != b.shape[2])
    throw UsageError("concat_channels: spatial shapes must match");
  const int n = a.shape[0], h = a.shape[1], w = a.shape[2];
  const int ca = a.shape[3], cb = b.shape[3];
  Tensor y = Tensor::zeros({n, h, w, ca + cb});
  const std::size_t cells = static_cast<std::size_t>(n) * h * w;
  for (std::size_t i = 0; i < cells; ++i) {
    float* dst = &y.v[i * (ca + cb)];
    const float* pa = &a.v[i * ca];
    const float* pb = &b.v[i * cb];
    for (int c = 0; c < ca; ++c) dst[c] = pa[c];
    for (int c = 0; c < cb; ++c) dst[ca + c] = pb[c];
  }
  bool ng = needs_grad(ai) || needs_grad(bi);
  return push(std::move(y), ng, [ai, bi, cells, ca, cb](Tape& t, NodeId self) {
    const auto& go = t.nodes_[self].grad;
    float* ga = t.needs_grad(ai) ? t.grad_buf(ai) : nullptr;
    float* gb = t.needs_grad(bi) ? t.grad_buf(bi) : nullptr;
    for (std::size_t i = 0; i < cells; ++i) {
      const float* g = &go[i * (ca + cb)];
      if (ga)
        for (int c = 0; c < ca; ++c) ga[i * ca + c] += g[c];
      if (gb)
        for (int c = 0; c < cb; ++c) gb[i * cb + c] += g[ca + c];
    }
  });
}

// ---------------------------------------------------------------------------

NodeId Tape::add(NodeId ai, NodeId bi) {
  const Tensor& a = val(ai);
  const Tensor& b = val(bi);
  if (!a.same_shape(b)) throw UsageError("add: shape mismatch");
  Tensor y = Tensor::zeros(a.shape);
  kern::add(a.data(), b.data(), y.data(), a.v.size());
  bool ng = needs_grad(ai) || needs_grad(bi);
  return push(std::move(y), ng, [ai, bi](Tape& t, NodeId self) {
    const auto& go = t.nodes_[self].grad;
    if (t.needs_grad(ai)) t.accum(ai, go.data(), go.size());
    if (t.needs_grad(bi)) t.accum(bi, go.data(), go.size());
  });
}

NodeId Tape::sub(NodeId ai, NodeId bi) {
  const Tensor& a = val(ai);
  const Tensor& b = val(bi);
  if (!a.same_shape(b)) throw UsageError("sub: shape mismatch");
  Tensor y = Tensor::zeros(a.shape);
  kern::sub(a.data(), b.data(), y.data(), a.v.size());
  bool ng = needs_grad(ai) || needs_grad(bi);
  return push(std::move(y), ng, [ai, bi](Tape& t, NodeId self) {
    const auto& go = t.nodes_[self].grad;
    if (t.needs_grad(ai)) t.accum(ai, go.data(), go.size());
    if (t.needs_grad(bi)) kern::axpy(-1.0f, go.data(), t.grad_buf(bi), go.size());
  });
}

NodeId Tape::mul(NodeId ai, NodeId bi) {
  const Tensor& a = val(ai);
  const Tensor& b = val(bi);
  if (!a.same_shape(b)) throw UsageError("mul: shape mismatch");
  Tensor y = Tensor::zeros(a.shape);
  kern::mul(a.data(), b.data(), y.data(), a.v.size());
  bool ng = needs_grad(ai) || needs_grad(bi);
  return push(std::move(y), ng, [ai, bi](Tape& t, NodeId self) {
    const auto& go = t.nodes_[self].grad;
    const Tensor& a = t.val(ai);
    const Tensor& b = t.val(bi);
    if (t.needs_grad(ai)) {
      float* g = t.grad_buf(ai);
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * b.v[i];
    }
    if (t.needs_grad(bi)) {
      float* g = t.grad_buf(bi);
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * a.v[i];
    }
  });
}

NodeId Tape::add_scalar(NodeId xi, float s) {
  const Tensor& x = val(xi);
  Tensor y = x;
  for (float& f : y.v) f += s;
  return push(std::move(y), needs_grad(xi), [xi](Tape& t, NodeId self) {
    if (!t.needs_grad(xi)) return;
    const auto& go = t.nodes_[self].grad;
    t.accum(xi, go.data(), go.size());
  });
}

NodeId Tape::mul_scalar(NodeId xi, float s) {
  const Tensor& x = val(xi);
  Tensor y = x;
  kern::scale(s, y.data(), y.v.size());
  return push(std::move(y), needs_grad(xi), [xi, s](Tape& t, NodeId self) {
    if (!t.needs_grad(xi)) return;
    const auto& go = t.nodes_[self].grad;
    kern::axpy(s, go.data(), t.grad_buf(xi), go.size());
  });
}

NodeId Tape::square(NodeId xi) {
  const Tensor& x = val(xi);
  Tensor y = Tensor::zeros(x.shape);
  kern::mul(x.data(), x.data(), y.data(), x.v.size());
  return push(std::move(y), needs_grad(xi), [xi](Tape& t, NodeId self) {
    if (!t.needs_grad(xi)) return;
    const auto& go = t.nodes_[self].grad;
    const Tensor& x = t.val(xi);
    float* g = t.grad_buf(xi);
    for (std::size_t i = 0; i < go.size(); ++i) g[i] += 2.0f * go[i] * x.v[i];
  });
}

NodeId Tape::exp(NodeId xi) {
  const Tensor& x = val(xi);
  Tensor y = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < x.v.size(); ++i) y.v[i] = std::exp(x.v[i]);
  return push(std::move(y), needs_grad(xi), [xi](Tape& t, NodeId self) {
    if (!t.needs_grad(xi)) return;
    const auto& go = t.nodes_[self].grad;
    const auto& y = t.nodes_[self].val;
    float* g = t.grad_buf(xi);
    for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * y.v[i];
  });
}

NodeId Tape::clamp(NodeId xi, float lo, float hi) {
  const Tensor& x = val(xi);
  Tensor y = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < x.v.size(); ++i)
    y.v[i] = x.v[i] < lo ? lo : (x.v[i] > hi ? hi : x.v[i]);
  return push(std::move(y), needs_grad(xi), [xi, lo, hi](Tape& t, NodeId self) {
    if (!t.needs_grad(xi)) return;
    const auto& go = t.nodes_[self].grad;
    const Tensor& x = t.val(xi);
    float* g = t.grad_buf(xi);
    for (std::size_t i = 0; i < go.size(); ++i)
      if (x.v[i] > lo && x.v[i] < hi) g[i] += go[i];
  });
}

NodeId Tape::min(NodeId ai, NodeId bi) {
  const Tensor& a = val(ai);
  const Tensor& b = val(bi);
  if (!a.same_shape(b)) throw UsageError("min: shape mismatch");
  Tensor y = Tensor::zeros(a.shape);
  for (std::size_t i = 0; i < a.v.size(); ++i) y.v[i] = a.v[i] <= b.v[i] ? a.v[i] : b.v[i];
  bool ng = needs_grad(ai) || needs_grad(bi);
  return push(std::move(y), ng, [ai, bi](Tape& t, NodeId self) {
    const auto& go = t.nodes_[self].grad;
    const Tensor& a = t.val(ai);
    const Tensor& b = t.val(bi);
    float* ga = t.needs_grad(ai) ? t.grad_buf(ai) : nullptr;
    float* gb = t.needs_grad(bi) ? t.grad_buf(bi) : nullptr;
    for (std::size_t i = 0; i < go.size(); ++i) {
      if (a.v[i] <= b.v[i]) {
        if (ga) ga[i] += go[i];
      } else if (gb) {
        gb[i] += go[i];
      }
    }
  });
}

NodeId Tape::mask_mul(NodeId xi, NodeId mi) {
  const Tensor& x = val(xi);
  const Tensor& m = val(mi);
  if (x.shape.size() != 4 || m.shape.size() != 4 || m.shape[3] != 1 ||
      x.shape[0] != m.shape[0] || x.shape[1] != m.shape[1] || x.shape[2] != m.shape[2])
    throw UsageError("mask_mul: expected x[N,H,W,C] and m[N,H,W,1]");
  const int c = x.shape[3];
  const std::size_t cells = m.v.size();
  Tensor y = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < cells; ++i)
    for (int ch = 0; ch < c; ++ch) y.v[i * c + ch] = x.v[i * c + ch] * m.v[i];
  bool ng = needs_grad(xi) || needs_grad(mi);
  return push(std::move(y), ng, [xi, mi, c, cells](Tape& t, NodeId self) {
    const auto& go = t.nodes_[self].grad;
    const Tensor& x = t.val(xi);
    const Tensor& m = t.val(mi);
    float* gx = t.needs_grad(xi) ? t.grad_buf(xi) : nullptr;
    float* gm = t.needs_grad(mi) ? t.grad_buf(mi) : nullptr;
    for (std::size_t i = 0; i < cells; ++i)
      for (int ch = 0; ch < c; ++ch) {
        float g = go[i * c + ch];
        if (gx) gx[i * c + ch] += g * m.v[i];
        if (gm) gm[i] += g * x.v[i * c + ch];
      }
  });
}

// ---------------------------------------------------------------------------

NodeId Tape::sum(NodeId xi) {
  const Tensor& x = val(xi);
  Tensor y = Tensor::scalar(kern::sum(x.data(), x.v.size()));
  return push(std::move(y), needs_grad(xi), [xi](Tape& t, NodeId self) {
    if (!t.needs_grad(xi)) return;
    float g = t.nodes_[self].grad[0];
    float* gx = t.grad_buf(xi);
    const std::size_t n = t.val(xi).v.size();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g;
  });
}

NodeId Tape::mean(NodeId xi) {
  const Tensor& x = val(xi);
  const float inv = 1.0f / static_cast<float>(x.v.size());
  Tensor y = Tensor::scalar(kern::sum(x.data(), x.v.size()) * inv);
  return push(std::move(y), needs_grad(xi), [xi, inv](Tape& t, NodeId self) {
    if (!t.needs_grad(xi)) return;
    float g = t.nodes_[self].grad[0] * inv;
    float* gx = t.grad_buf(xi);
    const std::size_t n = t.val(xi).v.size();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g;
  });
}

NodeId Tape::sum_abs(NodeId xi) {
  const Tensor& x = val(xi);
  Tensor y = Tensor::scalar(kern::sum_abs(x.data(), x.v.size()));
  return push(std::move(y), needs_grad(xi), [xi](Tape& t, NodeId self) {
    if (!t.needs_grad(xi)) return;
    float g = t.nodes_[self].grad[0];
    const Tensor& x = t.val(xi);
    float* gx = t.grad_buf(xi);
    for (std::size_t i = 0; i < x.v.size(); ++i)
      gx[i] += x.v[i] >= 0.0f ? g : -g;
  });
}

NodeId Tape::at_index(NodeId xi, std::int64_t flat) {
  const Tensor& x = val(xi);
  if (flat < 0 || flat >= x.size()) throw UsageError("at_index: out of range");
  Tensor y = Tensor::scalar(x.v[static_cast<std::size_t>(flat)]);
  return push(std::move(y), needs_grad(xi), [xi, flat](Tape& t, NodeId self) {
    if (!t.needs_grad(xi)) return;
    t.grad_buf(xi)[static_cast<std::size_t>(flat)] += t.nodes_[self].grad[0];
  });
}

// ---------------------------------------------------------------------------

namespace {
// Row-wise softmax of logits [N,K] into out.
void softmax_rows(const Tensor& logits, std::vector<float>& out) {
  const int n = logits.shape[0], k = logits.shape[1];
  out.resize(logits.v.size());
  for (int r = 0; r < n; ++r) {
    const float* row = &logits.v[static_cast<std::size_t>(r) * k];
    float* orow = &out[static_cast<std::size_t>(r) * k];
    float mx = row[0];
    for (int i = 1; i < k; ++i) mx = std::max(mx, row[i]);
    float z = 0.0f;
    for (int i = 0; i < k; ++i) {
      orow[i] = std::exp(row[i] - mx);
      z += orow[i];
    }
    for (int i = 0; i < k; ++i) orow[i] /= z;
  }
}
}  // namespace

NodeId Tape::logp_discrete(NodeId li, const std::vector<int>& actions) {
  const Tensor& logits = val(li);
  if (logits.shape.size() != 2) throw UsageError("logp_discrete: expected [N,K]");
  const int n = logits.shape[0], k = logits.shape[1];
  if (static_cast<int>(actions.size()) != n) throw UsageError("logp_discrete: action count mismatch");
  std::vector<float> p;
  softmax_rows(logits, p);
  Tensor y = Tensor::zeros({n});
  for (int r = 0; r < n; ++r) {
    int a = actions[r];
    if (a < 0 || a >= k) throw UsageError("logp_discrete: action out of range");
    y.v[r] = std::log(std::max(p[static_cast<std::size_t>(r) * k + a], 1e-30f));
  }
  return push(std::move(y), needs_grad(li), [li, actions, n, k](Tape& t, NodeId self) {
    if (!t.needs_grad(li)) return;
    const auto& go = t.nodes_[self].grad;
    std::vector<float> p;
    softmax_rows(t.val(li), p);
    float* g = t.grad_buf(li);
    for (int r = 0; r < n; ++r) {
      float gr = go[r];
      for (int i = 0; i < k; ++i) {
        float d = (i == actions[r] ? 1.0f : 0.0f) - p[static_cast<std::size_t>(r) * k + i];
        g[static_cast<std::size_t>(r) * k + i] += gr * d;
      }
    }
  });
}

NodeId Tape::entropy_discrete(NodeId li) {
  const Tensor& logits = val(li);
  if (logits.shape.size() != 2) throw UsageError("entropy_discrete: expected [N,K]");
  const int n = logits.shape[0], k = logits.shape[1];
  std::vector<float> p;
  softmax_rows(logits, p);
  Tensor y = Tensor::zeros({n});
  for (int r = 0; r < n; ++r) {
    float h = 0.0f;
    for (int i = 0; i < k; ++i) {
      float pi = p[static_cast<std::size_t>(r) * k + i];
      if (pi > 1e-30f) h -= pi * std::log(pi);
    }
    y.v[r] = h;
  }
  return push(std::move(y), needs_grad(li), [li, n, k](Tape& t, NodeId self) {
    if (!t.needs_grad(li)) return;
    const auto& go = t.nodes_[self].grad;
    const auto& h = t.nodes_[self].val;
    std::vector<float> p;
    softmax_rows(t.val(li), p);
    float* g = t.grad_buf(li);
    for (int r = 0; r < n; ++r) {
      for (int i = 0; i < k; ++i) {
        float pi = p[static_cast<std::size_t>(r) * k + i];
        float lg = pi > 1e-30f ? std::log(pi) : -69.0f;
        g[static_cast<std::size_t>(r) * k + i] += go[r] * (-pi * (lg + h.v[r]));
      }
    }
  });
}

NodeId Tape::gauss_logp(NodeId mi, NodeId si, const Tensor& actions) {
  const Tensor& mu = val(mi);
  const Tensor& ls = val(si);
  if (mu.shape.size() != 2 || ls.shape.size() != 1 || ls.shape[0] != mu.shape[1])
    throw UsageError("gauss_logp: expected mean[N,D], logstd[D]");
  if (!actions.same_shape(mu)) throw UsageError("gauss_logp: action shape mismatch");
  const int n = mu.shape[0], d = mu.shape[1];
  constexpr float kLog2Pi = 1.8378770664093455f;
  Tensor y = Tensor::zeros({n});
  for (int r = 0; r < n; ++r) {
    float lp = -0.5f * d * kLog2Pi;
    for (int j = 0; j < d; ++j) {
      float sd = std::exp(ls.v[j]);
      float z = (actions.v[static_cast<std::size_t>(r) * d + j] - mu.v[static_cast<std::size_t>(r) * d + j]) / sd;
      lp += -0.5f * z * z - ls.v[j];
    }
    y.v[r] = lp;
  }
  return push(std::move(y), needs_grad(mi) || needs_grad(si),
              [mi, si, actions, n, d](Tape& t, NodeId self) {
    const auto& go = t.nodes_[self].grad;
    const Tensor& mu = t.val(mi);
    const Tensor& ls = t.val(si);
    float* gm = t.needs_grad(mi) ? t.grad_buf(mi) : nullptr;
    float* gs = t.needs_grad(si) ? t.grad_buf(si) : nullptr;
    for (int r = 0; r < n; ++r) {
      float gr = go[r];
      if (gr == 0.0f) continue;
      for (int j = 0; j < d; ++j) {
        float sd = std::exp(ls.v[j]);
        float z = (actions.v[static_cast<std::size_t>(r) * d + j] -
                   mu.v[static_cast<std::size_t>(r) * d + j]) / sd;
        if (gm) gm[static_cast<std::size_t>(r) * d + j] += gr * z / sd;
        if (gs) gs[j] += gr * (z * z - 1.0f);
      }
    }
  });
}

// ---------------------------------------------------------------------------

void Tape::backward(NodeId out) {
  check(out);
  if (nodes_[out].val.size() != 1)
    throw UsageError("backward: output must be a scalar");
  if (!nodes_[out].needs_grad)
    throw UsageError("backward: output does not depend on any trainable leaf");
  grad_buf(out)[0] = 1.0f;
  for (NodeId id = out; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.back && n.needs_grad && !n.grad.empty()) n.back(*this, id);
  }
  for (auto& [id, p] : param_links_) {
    Node& n = nodes_[id];
    if (!n.grad.empty())
      kern::axpy(1.0f, n.grad.data(), p->grad.data(), n.grad.size());
  }
}

}  // namespace rlinrl
