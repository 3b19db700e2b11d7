#pragma once
// Vectorized inner loops for the tensor library. Scalar reference kernels are
// always compiled; an AVX2 variant is selected at runtime when the CPU
// supports it. Set RLINRL_KERNEL=scalar to force the reference path.

#include <cstddef>

namespace rlinrl::kern {

enum class Isa { scalar, avx2 };

// ISA chosen at first use (cpuid probe + env override), stable for the process.
Isa active_isa();
const char* isa_name(Isa isa);

// o and inputs must not alias unless stated.
float dot(const float* a, const float* b, std::size_t n);
void  axpy(float a, const float* x, float* y, std::size_t n);   // y += a*x
void  add(const float* a, const float* b, float* o, std::size_t n);
void  sub(const float* a, const float* b, float* o, std::size_t n);
void  mul(const float* a, const float* b, float* o, std::size_t n);
void  scale(float s, float* x, std::size_t n);
void  relu(const float* x, float* o, std::size_t n);
// gx += go where x > 0
void  relu_backward(const float* x, const float* go, float* gx, std::size_t n);
float sum(const float* x, std::size_t n);
float sum_abs(const float* x, std::size_t n);
float max_abs(const float* x, std::size_t n);

// In-place adaptive-moment parameter update; lr_t is the bias-corrected rate.
void adam_step(float* p, const float* g, float* m, float* v, std::size_t n,
               float lr_t, float beta1, float beta2, float eps);

// Reference implementations, exported for equivalence tests.
namespace scalar {
float dot(const float* a, const float* b, std::size_t n);
void  axpy(float a, const float* x, float* y, std::size_t n);
void  add(const float* a, const float* b, float* o, std::size_t n);
void  sub(const float* a, const float* b, float* o, std::size_t n);
void  mul(const float* a, const float* b, float* o, std::size_t n);
void  scale(float s, float* x, std::size_t n);
void  relu(const float* x, float* o, std::size_t n);
void  relu_backward(const float* x, const float* go, float* gx, std::size_t n);
float sum(const float* x, std::size_t n);
float sum_abs(const float* x, std::size_t n);
float max_abs(const float* x, std::size_t n);
void  adam_step(float* p, const float* g, float* m, float* v, std::size_t n,
                float lr_t, float beta1, float beta2, float eps);
}  // namespace scalar

}  // namespace rlinrl::kern
