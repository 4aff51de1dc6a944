#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace spheretopic {

using Rng = std::mt19937_64;

// Derives an independent generator for a named purpose from the run seed,
// so that adding a new consumer never shifts the stream of an existing one.
Rng substream(std::uint64_t seed, std::string_view label);

}  // namespace spheretopic
