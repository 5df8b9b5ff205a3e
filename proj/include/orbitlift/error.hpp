#pragma once

#include <stdexcept>
#include <string>

namespace orbitlift {

/// Base error for every failure raised by the library. Messages are stable
/// and are matched by the CLI and the tests.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace orbitlift
