#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace trice {

// Scalar type for all tensor math. The f64 build exists so that
// finite-difference gradient oracles can run at tight tolerances.
#ifdef TRICE_REAL_F64
using real = double;
#else
using real = float;
#endif

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IndexError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Checked mode scans op outputs for NaN/Inf. On in tests, off in training.
bool checked_mode();
void set_checked_mode(bool on);

/// splitmix64 step; used to derive independent sub-seeds from one user seed.
std::uint64_t mix_seed(std::uint64_t seed);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace trice
