#pragma once

#include <stdexcept>
#include <string>

namespace respore {

// Dimension/shape violations (mismatched operands, bad constructor dims).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid argument values that are not shape-related (bad pore coords,
// empty threshold grid, image smaller than a patch, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// API misuse: backward without a train-mode cache, consuming a cache twice.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// File-system and format failures on load/store paths.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checkpoint file damaged or not a checkpoint at all.
class CorruptCheckpointError : public IoError {
 public:
  using IoError::IoError;
};

// Checkpoint format version not understood by this build.
class CheckpointVersionError : public IoError {
 public:
  using IoError::IoError;
};

// Checkpoint carries a different network configuration than requested.
class WidthMismatchError : public IoError {
 public:
  using IoError::IoError;
};

// Synthetic generator could not satisfy the requested pore layout.
class GenerationError : public std::runtime_error {
 public:
  GenerationError(const std::string& what, int placed_count)
      : std::runtime_error(what), placed(placed_count) {}
  int placed;  // pores successfully placed before giving up
};

// Training aborted on a non-finite loss.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace respore
