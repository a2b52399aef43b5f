#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace semarag {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Raised when a record violates a domain invariant. `field()` names the
/// offending field so loaders can report it next to a line number.
class ValidationError : public Error {
 public:
  ValidationError(std::string code, std::string field, const std::string& detail)
      : Error(code + " [" + field + "]: " + detail), code_(std::move(code)), field_(std::move(field)) {}

  const std::string& code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string code_;
  std::string field_;
};

class DuplicateLabel : public ValidationError {
 public:
  DuplicateLabel(std::string field, const std::string& detail)
      : ValidationError("DuplicateLabel", std::move(field), detail) {}
};

class EmptyOptions : public ValidationError {
 public:
  explicit EmptyOptions(std::string field)
      : ValidationError("EmptyOptions", std::move(field), "question has no options") {}
};

class LabelSetMismatch : public ValidationError {
 public:
  LabelSetMismatch(std::string field, const std::string& detail)
      : ValidationError("LabelSetMismatch", std::move(field), detail) {}
};

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

class UnboundPlaceholder : public Error {
 public:
  explicit UnboundPlaceholder(std::string name)
      : Error("unbound placeholder {" + name + "}"), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

/// Retryable: connection failures, 429 and 5xx responses, injected faults.
class TransientBackendError : public BackendError {
 public:
  using BackendError::BackendError;
};

class AuthError : public BackendError {
 public:
  using BackendError::BackendError;
};

class MockScriptExhausted : public BackendError {
 public:
  using BackendError::BackendError;
};

class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Corpus / index
// ---------------------------------------------------------------------------

class EmbedderDimensionMismatch : public Error {
 public:
  EmbedderDimensionMismatch(std::size_t expected, std::size_t got)
      : Error("embedder dimension mismatch: expected " + std::to_string(expected) + ", got " +
              std::to_string(got)) {}
};

class MalformedCorpusRecord : public Error {
 public:
  MalformedCorpusRecord(std::string path, std::size_t line, const std::string& detail)
      : Error(path + ":" + std::to_string(line) + ": malformed corpus record: " + detail), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class EmptyIndex : public Error {
 public:
  EmptyIndex() : Error("vector index is empty") {}
};

class IndexFormatError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Agent output parsing
// ---------------------------------------------------------------------------

/// Base for agent outputs that could not be parsed; keeps the raw text for audit.
class AgentParseFailure : public Error {
 public:
  AgentParseFailure(const std::string& what, std::string raw) : Error(what), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class SchemaParseFailure : public AgentParseFailure {
 public:
  using AgentParseFailure::AgentParseFailure;
};

class VerdictParseFailure : public AgentParseFailure {
 public:
  using AgentParseFailure::AgentParseFailure;
};

class ReportParseFailure : public AgentParseFailure {
 public:
  using AgentParseFailure::AgentParseFailure;
};

class NoLabelFound : public AgentParseFailure {
 public:
  explicit NoLabelFound(std::string raw) : AgentParseFailure("no answer label found", std::move(raw)) {}
};

class AmbiguousLabel : public AgentParseFailure {
 public:
  AmbiguousLabel(const std::string& a, const std::string& b, std::string raw)
      : AgentParseFailure("ambiguous answer: " + a + " vs " + b, std::move(raw)) {}
};

// ---------------------------------------------------------------------------
// Harness
// ---------------------------------------------------------------------------

class DatasetError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace semarag
