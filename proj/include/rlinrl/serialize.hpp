#pragma once
// Versioned parameter blob. Layout, all little-endian:
//   "RLNR" | u16 version | u32 tensor count |
//   per tensor: u32 name length, UTF-8 name, u32 rank, u32 dims..., f32 payload

#include <map>
#include <string>
#include <vector>

#include "rlinrl/tensor.hpp"

namespace rlinrl {

inline constexpr std::uint16_t kBlobVersion = 1;

std::vector<std::uint8_t> serialize_tensors(const std::vector<std::pair<std::string, const Tensor*>>& tensors);
std::map<std::string, Tensor> deserialize_tensors(const std::vector<std::uint8_t>& blob);

// Whole-file helpers (atomic write via temp + rename).
void save_params_file(const std::string& path, const std::vector<std::pair<std::string, const Tensor*>>& tensors);
std::map<std::string, Tensor> load_params_file(const std::string& path);

// Copies values into params by name; every param must be present.
void assign_params(std::vector<Param>& params, const std::map<std::string, Tensor>& loaded);
std::vector<std::pair<std::string, const Tensor*>> collect_params(const std::vector<Param>& params);

}  // namespace rlinrl
