#pragma once

#include <stdexcept>
#include <string>

namespace xsib {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or malformed payloads.
class DataIntegrityError : public Error {
 public:
  using Error::Error;
};

/// Tensor or window dimensions that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid skeleton, model or training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A training clip could not be drawn from a sequence.
class SamplingError : public Error {
 public:
  using Error::Error;
};

/// Not enough frames for the requested horizon.
class HorizonError : public Error {
 public:
  using Error::Error;
};

/// Corrupt or incompatible file. `section()` names the part that failed.
class IntegrityError : public Error {
 public:
  IntegrityError(std::string section, const std::string& what)
      : Error(section + ": " + what), section_(std::move(section)) {}
  const std::string& section() const { return section_; }

 private:
  std::string section_;
};

/// Index outside the valid range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// File-system failures. `offset()` is the byte offset where reading stopped.
class IoError : public Error {
 public:
  IoError(const std::string& what, long long offset = -1)
      : Error(offset >= 0 ? what + " (at byte " + std::to_string(offset) + ")" : what),
        offset_(offset) {}
  long long offset() const { return offset_; }

 private:
  long long offset_;
};

}  // namespace xsib
