#include "rlinrl/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rlinrl {

namespace {

void check_obs(const PolicyNetwork& pre, const Tensor& s) {
  if (s.shape.size() != 4 || s.shape[0] != 1 || s.shape[1] != pre.obs_h() ||
      s.shape[2] != pre.obs_w() || s.shape[3] != pre.obs_c())
    throw UsageError("saliency expects a single observation matching the policy");
}

Tensor max_normalize(Tensor map) {
  float mx = 0.0f;
  for (float v : map.v) mx = std::max(mx, v);
  if (mx > 0.0f)
    for (float& v : map.v) v /= mx;
  return map;
}

}  // namespace

Tensor jacobian_saliency(PolicyNetwork& pre, const Tensor& s) {
  check_obs(pre, s);
  int h = pre.obs_h(), w = pre.obs_w(), c = pre.obs_c();
  Tensor map = Tensor::zeros({h, w});

  std::vector<std::int64_t> targets;
  if (pre.discrete()) {
    Action a = pre.act_deterministic(s);
    targets.push_back(a.discrete);
  } else {
    for (int d = 0; d < pre.act_dim(); ++d) targets.push_back(d);
  }
  for (std::int64_t tgt : targets) {
    Tape t;
    NodeId x = t.leaf(s, true);
    NodeId out = pre.actor_out(t, pre.features(t, x));
    t.backward(t.at_index(out, tgt));
    const std::vector<float>& g = t.grad(x);
    for (int i = 0; i < h * w; ++i) {
      float acc = 0.0f;
      for (int ch = 0; ch < c; ++ch) acc += std::fabs(g[static_cast<std::size_t>(i * c + ch)]);
      map.v[static_cast<std::size_t>(i)] += acc;
    }
  }
  return max_normalize(std::move(map));
}

Tensor gaussian_blur(const Tensor& s, float sigma) {
  if (sigma <= 0.0f) throw ConfigError("gaussian_blur: sigma must be positive");
  if (s.shape.size() != 4) throw UsageError("gaussian_blur expects [N,H,W,C]");
  int h = s.shape[1], w = s.shape[2], c = s.shape[3];
  int rad = static_cast<int>(std::ceil(3.0f * sigma));
  std::vector<float> k(static_cast<std::size_t>(2 * rad + 1));
  float ks = 0.0f;
  for (int i = -rad; i <= rad; ++i) {
    float v = std::exp(-0.5f * static_cast<float>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + rad)] = v;
    ks += v;
  }
  for (float& v : k) v /= ks;

  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return i;
  };
  auto at = [&](const Tensor& t, int r, int col, int ch) {
    return t.v[static_cast<std::size_t>(((r * w) + col) * c + ch)];
  };

  Tensor tmp = s, out = s;
  for (int r = 0; r < h; ++r)
    for (int col = 0; col < w; ++col)
      for (int ch = 0; ch < c; ++ch) {
        float acc = 0.0f;
        for (int i = -rad; i <= rad; ++i)
          acc += k[static_cast<std::size_t>(i + rad)] * at(s, r, reflect(col + i, w), ch);
        tmp.v[static_cast<std::size_t>(((r * w) + col) * c + ch)] = acc;
      }
  for (int r = 0; r < h; ++r)
    for (int col = 0; col < w; ++col)
      for (int ch = 0; ch < c; ++ch) {
        float acc = 0.0f;
        for (int i = -rad; i <= rad; ++i)
          acc += k[static_cast<std::size_t>(i + rad)] * at(tmp, reflect(r + i, h), col, ch);
        out.v[static_cast<std::size_t>(((r * w) + col) * c + ch)] = acc;
      }
  return out;
}

Tensor perturbation_saliency(PolicyNetwork& pre, const Tensor& s, const PerturbationConfig& cfg) {
  check_obs(pre, s);
  if (cfg.sigma <= 0.0f || cfg.radius < 0 || cfg.stride < 1)
    throw ConfigError("perturbation_saliency: bad sigma, radius or stride");
  int h = pre.obs_h(), w = pre.obs_w(), c = pre.obs_c();
  Tensor blurred = gaussian_blur(s, cfg.sigma);

  Tape t0;
  Tensor base = t0.val(pre.actor_out(t0, pre.features(t0, t0.leaf(s))));

  int gh = (h + cfg.stride - 1) / cfg.stride;
  int gw = (w + cfg.stride - 1) / cfg.stride;
  Tensor coarse = Tensor::zeros({gh, gw});
  for (int gi = 0; gi < gh; ++gi)
    for (int gj = 0; gj < gw; ++gj) {
      int ci = gi * cfg.stride, cj = gj * cfg.stride;
      Tensor sp = s;
      for (int r = std::max(0, ci - cfg.radius); r <= std::min(h - 1, ci + cfg.radius); ++r)
        for (int col = std::max(0, cj - cfg.radius); col <= std::min(w - 1, cj + cfg.radius); ++col) {
          int dr = r - ci, dc = col - cj;
          if (dr * dr + dc * dc > cfg.radius * cfg.radius) continue;
          for (int ch = 0; ch < c; ++ch) {
            std::size_t idx = static_cast<std::size_t>(((r * w) + col) * c + ch);
            sp.v[idx] = blurred.v[idx];
          }
        }
      Tape t;
      const Tensor& out = t.val(pre.actor_out(t, pre.features(t, t.leaf(sp))));
      float d2 = 0.0f;
      for (std::size_t i = 0; i < out.v.size(); ++i) {
        float d = out.v[i] - base.v[i];
        d2 += d * d;
      }
      coarse.v[static_cast<std::size_t>(gi * gw + gj)] = 0.5f * d2;
    }

  if (cfg.stride == 1) return max_normalize(std::move(coarse));

  // Bilinear upsample from the stride grid back to full resolution.
  Tensor map = Tensor::zeros({h, w});
  for (int r = 0; r < h; ++r)
    for (int col = 0; col < w; ++col) {
      float fr = std::min(static_cast<float>(r) / static_cast<float>(cfg.stride),
                          static_cast<float>(gh - 1));
      float fc = std::min(static_cast<float>(col) / static_cast<float>(cfg.stride),
                          static_cast<float>(gw - 1));
      int r0 = static_cast<int>(fr), c0 = static_cast<int>(fc);
      int r1 = std::min(r0 + 1, gh - 1), c1 = std::min(c0 + 1, gw - 1);
      float ar = fr - static_cast<float>(r0), ac = fc - static_cast<float>(c0);
      auto g = [&](int i, int j) { return coarse.v[static_cast<std::size_t>(i * gw + j)]; };
      map.v[static_cast<std::size_t>(r * w + col)] =
          (1 - ar) * ((1 - ac) * g(r0, c0) + ac * g(r0, c1)) +
          ar * ((1 - ac) * g(r1, c0) + ac * g(r1, c1));
    }
  return max_normalize(std::move(map));
}

Tensor saliency_to_mask(const Tensor& map, float q) {
  if (map.shape.size() != 2) throw UsageError("saliency_to_mask expects an [H,W] map");
  if (q <= 0.0f || q > 1.0f) throw ConfigError("saliency_to_mask: q must lie in (0,1]");
  int h = map.shape[0], w = map.shape[1];
  Tensor mask = Tensor::zeros({1, h, w, 1});
  float total = std::accumulate(map.v.begin(), map.v.end(), 0.0f);
  if (total <= 0.0f) return mask;

  std::vector<int> order(map.v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return map.v[static_cast<std::size_t>(a)] > map.v[static_cast<std::size_t>(b)];
  });
  float acc = 0.0f;
  for (int i : order) {
    if (acc >= q * total) break;
    acc += map.v[static_cast<std::size_t>(i)];
    mask.v[static_cast<std::size_t>(i)] = 1.0f;
  }
  return mask;
}

}  // namespace rlinrl
