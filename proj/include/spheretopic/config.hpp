#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "spheretopic/trainer.hpp"

namespace spheretopic {

struct RunConfig {
  TrainConfig train;
  std::filesystem::path embeddings;
  std::filesystem::path vocab;
  std::filesystem::path labels;
  std::filesystem::path out_dir = "out";
  std::uint64_t min_count = 5;
  std::size_t m_coherence = 10;
  std::size_t m_diversity = 25;
  std::size_t window = 10;
};

// Flat `key = value` lines; `#` starts a comment. Throws ParameterError on
// malformed lines or duplicate keys.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

// Applies each key to the config. Throws ParameterError for unknown keys or
// unparsable values.
void apply_config(const std::map<std::string, std::string>& values, RunConfig& config);

// Echo of every key in the same format, sorted by key.
std::string format_config(const RunConfig& config);

}  // namespace spheretopic
