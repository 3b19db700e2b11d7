#pragma once
// Counter-based splittable RNG. Every draw is a hash of (key, counter), so a
// stream can be split into independent substreams by key derivation and
// replayed exactly regardless of scheduling. State is two u64s, trivially
// snapshottable.

#include <cmath>
#include <cstdint>

namespace rlinrl {

namespace detail {
// SplitMix64 finalizer (Steele et al.), a full-period bijective mixer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(std::uint64_t seed) : key_(detail::mix64(seed ^ 0x2545f4914f6cdd1dULL)), ctr_(0) {}

  // Independent substream; does not advance this stream.
  Rng split(std::uint64_t stream) const {
    Rng r;
    r.key_ = detail::mix64(key_ ^ detail::mix64(stream + 0x632be59bd9b4e019ULL));
    r.ctr_ = 0;
    return r;
  }

  std::uint64_t next_u64() { return detail::mix64(key_ ^ detail::mix64(ctr_++)); }

  std::uint32_t next_u32() { return static_cast<std::uint32_t>(next_u64() >> 32); }

  // Uniform in [0, 1).
  float uniform() {
    return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
  }

  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

  // One int in [0, n).
  std::uint32_t below(std::uint32_t n) {
    return static_cast<std::uint32_t>((static_cast<std::uint64_t>(next_u32()) * n) >> 32);
  }

  float normal() {
    // Box-Muller; one draw discarded to keep the state a pure counter.
    float u1 = uniform();
    float u2 = uniform();
    if (u1 < 1e-12f) u1 = 1e-12f;
    return std::sqrt(-2.0f * std::log(u1)) * std::cos(6.28318530717958647692f * u2);
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return ctr_; }
  void set_state(std::uint64_t key, std::uint64_t ctr) { key_ = key; ctr_ = ctr; }

  bool operator==(const Rng&) const = default;

 private:
  std::uint64_t key_;
  std::uint64_t ctr_;
};

}  // namespace rlinrl
