#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "hazegan/tensor.hpp"

namespace hazegan {

// Versioned little-endian container for named tensors plus integer metadata.
// Used for checkpoints and feature-extractor weights.
//
// Layout:
//   magic "HZTC" | u32 version | u64 fingerprint
//   u32 int_count    { u16 name_len | name | i64 value } ...
//   u32 tensor_count { u16 name_len | name | u32 dims[4] | f32 data[] } ...
struct TensorStore {
  static constexpr uint32_t kVersion = 1;

  uint64_t fingerprint = 0;
  std::map<std::string, int64_t> ints;
  std::map<std::string, Tensor> tensors;

  // Atomic write (temp file + rename).
  void save(const std::string& path) const;
  static TensorStore load(const std::string& path);

  // Reads the header only; cheap fingerprint inspection without tensor data.
  static uint64_t peek_fingerprint(const std::string& path);

  int64_t get_int(const std::string& name) const;
  const Tensor& get_tensor(const std::string& name) const;
};

}  // namespace hazegan
