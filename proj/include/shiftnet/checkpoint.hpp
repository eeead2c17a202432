#pragma once

#include <filesystem>

#include "shiftnet/network.hpp"

namespace shiftnet {

// Little-endian binary:
//   "SNCK" | u32 version | u32 tensor count | u64 rng_seed
//   per tensor: u32 name length | name bytes | u32 ndim | u32 shape[ndim] | f32 values
// Values are stored as float32.
void write_checkpoint(const NetParams& params, const std::filesystem::path& path);

// Throws CkptFormat for a malformed file and CkptShape when the tensors do not
// match the built-in architecture.
NetParams read_checkpoint(const std::filesystem::path& path);

}  // namespace shiftnet
