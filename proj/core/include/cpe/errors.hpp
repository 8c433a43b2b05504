#pragma once

#include <stdexcept>
#include <string>

namespace cpe {

// Base for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent configuration (invalid weights, malformed run config).
// `field()` names the offending config field when known, e.g. "train.learning_rate".
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& field, const std::string& detail)
      : Error("config error at '" + field + "': " + detail), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Operation called on data that is not in the required state
// (e.g. sampling before rewards were assigned).
class StateError : public Error {
 public:
  using Error::Error;
};

// Toy-mode operation applied to a free-text sample or vice versa.
class UnsupportedModeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class KeyError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// JSONL parse failure; line numbers are 1-based.
class ParseError : public Error {
 public:
  ParseError(int line, const std::string& detail)
      : Error("parse error at line " + std::to_string(line) + ": " + detail),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_ = 0;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

enum class ProtocolErrorKind {
  MissingTag,
  BadNumber,
  OutOfRange,
  Ambiguous,
  EmptyChoices,
};

std::string to_string(ProtocolErrorKind kind);

// Violation of a structured text protocol (critique/score blocks, chat
// completion payloads).
class ProtocolError : public Error {
 public:
  ProtocolError(ProtocolErrorKind kind, const std::string& detail)
      : Error("protocol error (" + cpe::to_string(kind) + "): " + detail),
        kind_(kind) {}
  ProtocolErrorKind kind() const { return kind_; }

 private:
  ProtocolErrorKind kind_;
};

enum class TransportKind {
  RateLimited,
  ServerError,
  ClientError,
  Timeout,
};

std::string to_string(TransportKind kind);

class TransportError : public Error {
 public:
  TransportError(TransportKind kind, int status, const std::string& detail)
      : Error("transport error (" + cpe::to_string(kind) +
              ", status=" + std::to_string(status) + "): " + detail),
        kind_(kind),
        status_(status) {}
  TransportKind kind() const { return kind_; }
  int status() const { return status_; }

 private:
  TransportKind kind_;
  int status_ = 0;
};

// Critique text that stayed malformed after the one allowed reprompt.
// Carries the raw model output for offline inspection.
class GrmFormatError : public Error {
 public:
  explicit GrmFormatError(std::string raw)
      : Error("critique output malformed after reprompt"), raw_(std::move(raw)) {}
  const std::string& raw_output() const { return raw_; }

 private:
  std::string raw_;
};

// All length differences of a (model, baseline) pair are equal, so the
// standardized length feature is undefined.
class DegenerateFeatureError : public Error {
 public:
  DegenerateFeatureError(const std::string& model, const std::string& baseline)
      : Error("degenerate length feature for pair (" + model + ", " + baseline +
              "): zero variance in length differences"),
        model_(model),
        baseline_(baseline) {}
  const std::string& model() const { return model_; }
  const std::string& baseline() const { return baseline_; }

 private:
  std::string model_;
  std::string baseline_;
};

}  // namespace cpe
