// SPDX-License-Identifier: Apache-2.0

#ifndef GEODEPTH_ERROR_HPP
#define GEODEPTH_ERROR_HPP

#include <stdexcept>
#include <string>

namespace geodepth {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// File contents violate the expected format (bad magic, wrong bit depth,
/// truncated payload, unparsable field). The message names the expectation.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(what) {}
};

/// Filesystem-level failure (missing file, unreadable directory).
class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

/// A configuration value is out of its documented domain.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

/// A function precondition on runtime data was violated (degenerate input,
/// dimension mismatch, empty set where at least one element is required).
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(what) {}
};

}  // namespace geodepth

#endif  // GEODEPTH_ERROR_HPP
