#pragma once

#include <stdexcept>
#include <string>

namespace pfpose {

// Base of every error thrown by the library. Subclasses name the failure
// category so callers can decide skip-or-fail without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class InvalidRotation : public Error {
 public:
  using Error::Error;
};

class EmptyCloud : public Error {
 public:
  using Error::Error;
};

class EmptyMask : public Error {
 public:
  using Error::Error;
};

class InvalidLabel : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class MissingFile : public Error {
 public:
  using Error::Error;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class CropTooSmall : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

// Thrown when a training loss turns non-finite. Carries the path of the
// last checkpoint written before divergence (empty if none was written).
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::string last_good)
      : Error(what), last_good_checkpoint_(std::move(last_good)) {}

  const std::string& last_good_checkpoint() const { return last_good_checkpoint_; }

 private:
  std::string last_good_checkpoint_;
};

}  // namespace pfpose
