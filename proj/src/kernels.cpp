#include "rlinrl/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>

#if defined(__x86_64__) || defined(__i386__)
#define RLINRL_X86 1
#include <immintrin.h>
#else
#define RLINRL_X86 0
#endif

namespace rlinrl::kern {

// ---------------------------------------------------------------------------
// scalar reference
// ---------------------------------------------------------------------------
namespace scalar {

float dot(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(float a, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add(const float* a, const float* b, float* o, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) o[i] = a[i] + b[i];
}

void sub(const float* a, const float* b, float* o, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) o[i] = a[i] - b[i];
}

void mul(const float* a, const float* b, float* o, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) o[i] = a[i] * b[i];
}

void scale(float s, float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= s;
}

void relu(const float* x, float* o, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) o[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(const float* x, const float* go, float* gx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > 0.0f) gx[i] += go[i];
}

float sum(const float* x, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

float sum_abs(const float* x, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += std::fabs(x[i]);
  return acc;
}

float max_abs(const float* x, std::size_t n) {
  float m = 0.0f;
  for (std::size_t i = 0; i < n; ++i) {
    float v = std::fabs(x[i]);
    if (v > m) m = v;
  }
  return m;
}

void adam_step(float* p, const float* g, float* m, float* v, std::size_t n,
               float lr_t, float beta1, float beta2, float eps) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
    p[i] -= lr_t * m[i] / (std::sqrt(v[i]) + eps);
  }
}

}  // namespace scalar

// ---------------------------------------------------------------------------
// AVX2 variants
// ---------------------------------------------------------------------------
#if RLINRL_X86
namespace avx2 {

__attribute__((target("avx2,fma")))
static inline float hsum256(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_hadd_ps(lo, lo);
  lo = _mm_hadd_ps(lo, lo);
  return _mm_cvtss_f32(lo);
}

__attribute__((target("avx2,fma")))
float dot(const float* a, const float* b, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc);
  float r = hsum256(acc);
  for (; i < n; ++i) r += a[i] * b[i];
  return r;
}

__attribute__((target("avx2,fma")))
void axpy(float a, const float* x, float* y, std::size_t n) {
  __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vy = _mm256_loadu_ps(y + i);
    vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy);
    _mm256_storeu_ps(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

__attribute__((target("avx2")))
void add(const float* a, const float* b, float* o, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(o + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) o[i] = a[i] + b[i];
}

__attribute__((target("avx2")))
void sub(const float* a, const float* b, float* o, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(o + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) o[i] = a[i] - b[i];
}

__attribute__((target("avx2")))
void mul(const float* a, const float* b, float* o, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(o + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) o[i] = a[i] * b[i];
}

__attribute__((target("avx2")))
void scale(float s, float* x, std::size_t n) {
  __m256 vs = _mm256_set1_ps(s);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(x + i, _mm256_mul_ps(_mm256_loadu_ps(x + i), vs));
  for (; i < n; ++i) x[i] *= s;
}

__attribute__((target("avx2")))
void relu(const float* x, float* o, std::size_t n) {
  __m256 z = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(o + i, _mm256_max_ps(_mm256_loadu_ps(x + i), z));
  for (; i < n; ++i) o[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

__attribute__((target("avx2")))
void relu_backward(const float* x, const float* go, float* gx, std::size_t n) {
  __m256 z = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), z, _CMP_GT_OQ);
    __m256 g = _mm256_and_ps(_mm256_loadu_ps(go + i), mask);
    _mm256_storeu_ps(gx + i, _mm256_add_ps(_mm256_loadu_ps(gx + i), g));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0f) gx[i] += go[i];
}

__attribute__((target("avx2")))
float sum(const float* x, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
  float r = hsum256(acc);
  for (; i < n; ++i) r += x[i];
  return r;
}

__attribute__((target("avx2")))
float sum_abs(const float* x, std::size_t n) {
  __m256 sign = _mm256_set1_ps(-0.0f);
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    acc = _mm256_add_ps(acc, _mm256_andnot_ps(sign, _mm256_loadu_ps(x + i)));
  float r = hsum256(acc);
  for (; i < n; ++i) r += std::fabs(x[i]);
  return r;
}

__attribute__((target("avx2")))
float max_abs(const float* x, std::size_t n) {
  __m256 sign = _mm256_set1_ps(-0.0f);
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    acc = _mm256_max_ps(acc, _mm256_andnot_ps(sign, _mm256_loadu_ps(x + i)));
  float lanes[8];
  _mm256_storeu_ps(lanes, acc);
  float m = 0.0f;
  for (float v : lanes)
    if (v > m) m = v;
  for (; i < n; ++i) {
    float v = std::fabs(x[i]);
    if (v > m) m = v;
  }
  return m;
}

__attribute__((target("avx2,fma")))
void adam_step(float* p, const float* g, float* m, float* v, std::size_t n,
               float lr_t, float beta1, float beta2, float eps) {
  __m256 vb1 = _mm256_set1_ps(beta1), vb1c = _mm256_set1_ps(1.0f - beta1);
  __m256 vb2 = _mm256_set1_ps(beta2), vb2c = _mm256_set1_ps(1.0f - beta2);
  __m256 vlr = _mm256_set1_ps(lr_t), veps = _mm256_set1_ps(eps);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vg = _mm256_loadu_ps(g + i);
    __m256 vm = _mm256_fmadd_ps(vb1c, vg, _mm256_mul_ps(vb1, _mm256_loadu_ps(m + i)));
    __m256 vv = _mm256_fmadd_ps(vb2c, _mm256_mul_ps(vg, vg),
                                _mm256_mul_ps(vb2, _mm256_loadu_ps(v + i)));
    _mm256_storeu_ps(m + i, vm);
    _mm256_storeu_ps(v + i, vv);
    __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vv), veps);
    __m256 vp = _mm256_loadu_ps(p + i);
    _mm256_storeu_ps(p + i, _mm256_sub_ps(vp, _mm256_div_ps(_mm256_mul_ps(vlr, vm), denom)));
  }
  if (i < n)
    scalar::adam_step(p + i, g + i, m + i, v + i, n - i, lr_t, beta1, beta2, eps);
}

}  // namespace avx2
#endif  // RLINRL_X86

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

static Isa detect_isa() {
  const char* env = std::getenv("RLINRL_KERNEL");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
#if RLINRL_X86
    if (std::strcmp(env, "avx2") == 0 && __builtin_cpu_supports("avx2"))
      return Isa::avx2;
#endif
    return Isa::scalar;
  }
#if RLINRL_X86
  if (__builtin_cpu_supports("avx2")) return Isa::avx2;
#endif
  return Isa::scalar;
}

Isa active_isa() {
  static const Isa isa = detect_isa();
  return isa;
}

const char* isa_name(Isa isa) {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

#if RLINRL_X86
#define RLINRL_DISPATCH(fn, ...) \
  return active_isa() == Isa::avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__)
#else
#define RLINRL_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

float dot(const float* a, const float* b, std::size_t n) { RLINRL_DISPATCH(dot, a, b, n); }
void axpy(float a, const float* x, float* y, std::size_t n) { RLINRL_DISPATCH(axpy, a, x, y, n); }
void add(const float* a, const float* b, float* o, std::size_t n) { RLINRL_DISPATCH(add, a, b, o, n); }
void sub(const float* a, const float* b, float* o, std::size_t n) { RLINRL_DISPATCH(sub, a, b, o, n); }
void mul(const float* a, const float* b, float* o, std::size_t n) { RLINRL_DISPATCH(mul, a, b, o, n); }
void scale(float s, float* x, std::size_t n) { RLINRL_DISPATCH(scale, s, x, n); }
void relu(const float* x, float* o, std::size_t n) { RLINRL_DISPATCH(relu, x, o, n); }
void relu_backward(const float* x, const float* go, float* gx, std::size_t n) {
  RLINRL_DISPATCH(relu_backward, x, go, gx, n);
}
float sum(const float* x, std::size_t n) { RLINRL_DISPATCH(sum, x, n); }
float sum_abs(const float* x, std::size_t n) { RLINRL_DISPATCH(sum_abs, x, n); }
float max_abs(const float* x, std::size_t n) { RLINRL_DISPATCH(max_abs, x, n); }
void adam_step(float* p, const float* g, float* m, float* v, std::size_t n,
               float lr_t, float beta1, float beta2, float eps) {
  RLINRL_DISPATCH(adam_step, p, g, m, v, n, lr_t, beta1, beta2, eps);
}

}  // namespace rlinrl::kern
