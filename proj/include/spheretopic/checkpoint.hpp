#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "spheretopic/parameters.hpp"

namespace spheretopic {

// Binary checkpoint, little-endian, doubles stored bit-exactly:
//   magic "TPCK", version u32, seed u64, r u32, r' u32, K u32, kappa f64,
//   attention: d_a u32, content_only u8, W (row-major), b, v,
//   encoder and decoder: layer count u32, then per layer out u32, in u32,
//   weight (row-major), bias; topics K x r' (row-major).
struct Checkpoint {
  Parameters params;
  std::uint64_t seed = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace spheretopic
