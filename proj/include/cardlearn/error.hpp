#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cardlearn {

/// Base of every recoverable error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A row handed to create_table does not match the schema.
class SchemaViolation : public Error {
 public:
  SchemaViolation(std::size_t row_index, const std::string& what)
      : Error("row " + std::to_string(row_index) + ": " + what), row_index_(row_index) {}

  std::size_t row_index() const noexcept { return row_index_; }

 private:
  std::size_t row_index_;
};

class CatalogError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class UnsupportedClause : public Error {
 public:
  using Error::Error;
};

class PlanningError : public Error {
 public:
  using Error::Error;
};

class ExecutionError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a documented precondition (dimension mismatch, negative input).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cardlearn
