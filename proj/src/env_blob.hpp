#pragma once
// Little-endian byte packing for environment snapshots.

#include <cstdint>
#include <cstring>
#include <vector>

#include "rlinrl/errors.hpp"

namespace rlinrl::blob {

inline void put_u64(std::vector<std::uint8_t>& b, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
}
inline void put_i32(std::vector<std::uint8_t>& b, std::int32_t x) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(static_cast<std::uint32_t>(x) >> (8 * i)));
}
inline void put_f32(std::vector<std::uint8_t>& b, float x) {
  std::uint32_t u;
  std::memcpy(&u, &x, 4);
  put_i32(b, static_cast<std::int32_t>(u));
}

struct Reader {
  const std::vector<std::uint8_t>& b;
  std::size_t pos = 0;

  void need(std::size_t n) {
    if (pos + n > b.size()) throw IntegrityError("snapshot blob truncated");
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(b[pos + i]) << (8 * i);
    pos += 8;
    return x;
  }
  std::int32_t i32() {
    need(4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(b[pos + i]) << (8 * i);
    pos += 4;
    return static_cast<std::int32_t>(x);
  }
  float f32() {
    std::uint32_t u = static_cast<std::uint32_t>(i32());
    float x;
    std::memcpy(&x, &u, 4);
    return x;
  }
  void done() {
    if (pos != b.size()) throw IntegrityError("snapshot blob has trailing bytes");
  }
};

}  // namespace rlinrl::blob
