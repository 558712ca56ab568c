#pragma once

#include <stdexcept>
#include <string>

namespace semihoc {

/// Invalid arguments, configuration, or usage. Maps to CLI exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent data on disk. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace semihoc
