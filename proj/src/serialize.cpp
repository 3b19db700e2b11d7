#include "rlinrl/serialize.hpp"

#include <cstring>

#include "rlinrl/io.hpp"

namespace rlinrl {

namespace {

void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}
void put_f32(std::vector<std::uint8_t>& b, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(b, v);
}

struct Reader {
  const std::vector<std::uint8_t>& b;
  std::size_t pos = 0;
  void need(std::size_t n) const {
    if (pos + n > b.size()) throw IntegrityError("parameter blob truncated");
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(b[pos] | (b[pos + 1] << 8));
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  float f32() {
    std::uint32_t v = u32();
    float f;
    std::memcpy(&f, &v, 4);
    return f;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(&b[pos]), n);
    pos += n;
    return s;
  }
};

}  // namespace

std::vector<std::uint8_t> serialize_tensors(
    const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  std::vector<std::uint8_t> b;
  b.push_back('R');
  b.push_back('L');
  b.push_back('N');
  b.push_back('R');
  put_u16(b, kBlobVersion);
  put_u32(b, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_u32(b, static_cast<std::uint32_t>(name.size()));
    b.insert(b.end(), name.begin(), name.end());
    put_u32(b, static_cast<std::uint32_t>(t->shape.size()));
    for (int d : t->shape) put_u32(b, static_cast<std::uint32_t>(d));
    for (float f : t->v) put_f32(b, f);
  }
  return b;
}

std::map<std::string, Tensor> deserialize_tensors(const std::vector<std::uint8_t>& blob) {
  Reader r{blob};
  if (r.str(4) != "RLNR") throw IntegrityError("bad magic: not an RLNR parameter blob");
  std::uint16_t ver = r.u16();
  if (ver != kBlobVersion)
    throw IntegrityError("unsupported blob version " + std::to_string(ver));
  std::uint32_t count = r.u32();
  std::map<std::string, Tensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str(r.u32());
    std::uint32_t rank = r.u32();
    std::vector<int> shape;
    std::int64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      std::uint32_t dim = r.u32();
      if (dim == 0 || dim > (1u << 24)) throw IntegrityError("bad tensor dim in blob");
      shape.push_back(static_cast<int>(dim));
      n *= dim;
    }
    std::vector<float> data(static_cast<std::size_t>(n));
    for (auto& f : data) f = r.f32();
    out.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

void save_params_file(const std::string& path,
                      const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  write_file_atomic(path, serialize_tensors(tensors));
}

std::map<std::string, Tensor> load_params_file(const std::string& path) {
  return deserialize_tensors(read_file(path));
}

void assign_params(std::vector<Param>& params, const std::map<std::string, Tensor>& loaded) {
  for (Param& p : params) {
    auto it = loaded.find(p.name);
    if (it == loaded.end())
      throw IntegrityError("checkpoint missing parameter '" + p.name + "'");
    if (it->second.shape != p.value.shape)
      throw IntegrityError("checkpoint shape mismatch for '" + p.name + "'");
    p.value = it->second;
  }
}

std::vector<std::pair<std::string, const Tensor*>> collect_params(const std::vector<Param>& params) {
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(params.size());
  for (const Param& p : params) out.emplace_back(p.name, &p.value);
  return out;
}

}  // namespace rlinrl
