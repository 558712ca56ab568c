#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semihoc/config.hpp"
#include "semihoc/trainer.hpp"

namespace semihoc {

/// Complete training snapshot. Resuming from it continues the run exactly.
struct Checkpoint {
  std::uint64_t hierarchy_hash = 0;
  std::uint32_t input_dim = 0;
  std::uint64_t sample_count = 0;
  TrainConfig config;
  TrainerState state;
  std::vector<std::string> csv_rows;  // metrics rows of the epochs already run
};

/// Writes to a temporary file first, then renames over `path`.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Throws DataError on a malformed or truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace semihoc
