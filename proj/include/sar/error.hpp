#pragma once

#include <stdexcept>
#include <string>

namespace sar {

/// Malformed input files, bad arguments, incompatible shapes. The CLI maps
/// these to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runtime or numeric failure (divergence, non-finite loss). Exit code 1.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sar
