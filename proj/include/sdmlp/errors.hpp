#pragma once

#include <stdexcept>
#include <string>

namespace sdmlp {

// Error taxonomy shared by every module. The CLI maps all of these to exit code 1.

class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Operation called on an object in the wrong state (e.g. backward without a cached forward).
class StateError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

class NoValidPixels : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace sdmlp
