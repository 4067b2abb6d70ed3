#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mcpred/nn/tensor.hpp"

namespace mcpred::nn {

// Binary parameter file:
//   "MCPRCKPT"  8-byte magic
//   u32         format version
//   u64 + bytes metadata blob (UTF-8 text owned by the caller)
//   u32         tensor count
//   per tensor: u32 name length, name bytes, u32 rank, u64 dims[rank],
//               f64 values
// All integers and floats little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;

  bool operator==(const NamedTensor&) const = default;
};

struct CheckpointData {
  std::string metadata;
  std::vector<NamedTensor> tensors;

  bool operator==(const CheckpointData&) const = default;
};

void write_checkpoint(std::ostream& out, const CheckpointData& data);
// Throws DataError on bad magic, unsupported version, or truncation.
CheckpointData read_checkpoint(std::istream& in);

void save_checkpoint_file(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint_file(const std::string& path);

}  // namespace mcpred::nn
