#pragma once

#include <string>

#include "trice/model.hpp"

namespace trice {

struct BadMagicError : IoError {
  using IoError::IoError;
};
struct TruncatedError : IoError {
  using IoError::IoError;
};
struct NameMismatchError : IoError {
  using IoError::IoError;
};

/// Serialized training state: architecture, named tensors, how far along
/// the pipeline the parameters are, and the trainer RNG.
struct Checkpoint {
  ModelConfig config;
  Parameters params;
  Stage stage = Stage::kPretrained;
  long step = 0;
  std::string rng_state;  // text-serialized engine state
};

// Binary layout: "TRICE\x01", length-prefixed key=value config block,
// tensor count, per tensor (name length + name, rank, u32 dims, f32
// little-endian data), length-prefixed RNG blob.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace trice
