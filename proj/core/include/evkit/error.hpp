#pragma once

#include <stdexcept>
#include <string>

namespace evkit {

/// Precondition or invariant violated by the caller (unsorted input, bad
/// parameters, mismatched resolutions).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A requested time span or index lies outside what a recording covers.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// File-system failure while reading or writing.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (bad magic, truncated block, unparsable line).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure, e.g. a non-finite objective value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// RRT could not connect start and goal within its iteration budget.
class PlanningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace evkit
