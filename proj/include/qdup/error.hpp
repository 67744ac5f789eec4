#pragma once

#include <stdexcept>
#include <string>

namespace qdup {

// Argument outside the mathematical domain of an operation (non-positive
// wavelength, negative rate, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Measured/derived quantity exceeds a physical bound.
class InconsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (unsorted stream, config mismatch).
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid scenario or component configuration. `key` names the offending
// config entry when one is known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Timestamp arithmetic would leave the 64-bit picosecond range.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Malformed event file. `offset` is the byte offset of the problem.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : std::runtime_error("byte offset " + std::to_string(offset) + ": " + what),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Nonlinear fit failed; the message carries the diagnostics.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qdup
