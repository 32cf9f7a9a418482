#ifndef FOVSTREAM_ERRORS_H_
#define FOVSTREAM_ERRORS_H_

#include <stdexcept>
#include <string>

namespace fovstream {

// Invalid argument to a library call (out-of-range index, bad extents...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Model fitting could not produce a valid parameter set.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The region-size/rate optimizer has no admissible candidate.
class AllocationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent trace / prediction / config input.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A simulation could not complete (for example, the traces run out).
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fovstream

#endif  // FOVSTREAM_ERRORS_H_
