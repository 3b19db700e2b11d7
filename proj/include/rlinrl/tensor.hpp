#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "rlinrl/errors.hpp"

namespace rlinrl {

// Dense row-major float32 array. Plain value type; gradients live on the tape
// (or in Param for persistent parameters).
struct Tensor {
  std::vector<int> shape;
  std::vector<float> v;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<float> data) : shape(std::move(s)), v(std::move(data)) {
    if (static_cast<std::int64_t>(v.size()) != numel(shape))
      throw UsageError("tensor data length does not match shape");
  }

  static std::int64_t numel(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) {
      if (d <= 0) throw UsageError("tensor dims must be positive");
      n *= d;
    }
    return n;
  }

  static Tensor zeros(std::vector<int> s) {
    auto n = numel(s);
    return Tensor(std::move(s), std::vector<float>(static_cast<std::size_t>(n), 0.0f));
  }

  static Tensor full(std::vector<int> s, float x) {
    auto n = numel(s);
    return Tensor(std::move(s), std::vector<float>(static_cast<std::size_t>(n), x));
  }

  static Tensor scalar(float x) { return Tensor({1}, {x}); }

  std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }
  float* data() { return v.data(); }
  const float* data() const { return v.data(); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// Named trainable parameter with persistent gradient accumulator.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;          // same shape, zeroed between updates
  bool trainable = true;

  Param() = default;
  Param(std::string n, Tensor t)
      : name(std::move(n)), value(std::move(t)), grad(Tensor::zeros(value.shape)) {}

  void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), 0.0f); }
};

}  // namespace rlinrl
