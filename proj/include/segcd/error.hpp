#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace segcd {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two grids that must agree on width/height do not.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Run-length data that does not describe a valid mask.
class CorruptMaskError : public Error {
 public:
  using Error::Error;
};

/// bbox/centroid requested from a mask with no set pixels.
class EmptyMaskError : public Error {
 public:
  using Error::Error;
};

class EmptyInstanceError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content. Carries the byte offset when one is meaningful.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(what) {}
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::optional<std::size_t> offset() const noexcept { return offset_; }

 private:
  std::optional<std::size_t> offset_;
};

class LegendError : public Error {
 public:
  using Error::Error;
};

/// A prompted result that cannot be matched to its instance.
class PairingError : public Error {
 public:
  using Error::Error;
};

class PlacementError : public Error {
 public:
  using Error::Error;
};

class ExportError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range tunable (threshold, connectivity, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

}  // namespace segcd
