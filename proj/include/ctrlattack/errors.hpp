#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ctrlattack {

// Bad argument values (ranges, counts, unknown names).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dimension or length mismatch between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A value was well-formed but violated a domain invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file content. Carries a location string like "line 3" or "boxes[2][1]".
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& location, const std::string& what)
      : std::runtime_error(location + ": " + what), location_(location) {}
  const std::string& location() const { return location_; }

 private:
  std::string location_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Wire protocol errors. Not retried.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(const std::string& what, std::string excerpt)
      : std::runtime_error(what + " [payload: " + excerpt + "]"), excerpt_(std::move(excerpt)) {}
  const std::string& excerpt() const { return excerpt_; }

 private:
  std::string excerpt_;
};

// Transport failures (broken pipe, connection refused). Retryable.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TimeoutError : public TransportError {
 public:
  using TransportError::TransportError;
};

// Raised by the NES driver when evaluating one candidate fails.
class CandidateError : public std::runtime_error {
 public:
  CandidateError(std::size_t index, const std::string& what)
      : std::runtime_error("candidate " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(int iteration)
      : std::runtime_error("non-finite gradient at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

}  // namespace ctrlattack
