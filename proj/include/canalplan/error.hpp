#pragma once

#include <stdexcept>
#include <string>

namespace canalplan {

// Root of every error the toolkit raises. The CLI maps the subclasses onto
// exit codes (usage 2, infeasible model 3, I/O 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file: carries the offending line (when known) and field.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, int line, const std::string& field,
             const std::string& message)
      : Error(file + (line > 0 ? ":" + std::to_string(line) : std::string()) +
              (field.empty() ? std::string() : ": field '" + field + "'") + ": " + message),
        line_(line),
        field_(field) {}

  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Input is well formed but violates a structural requirement (e.g. the canal
// graph is not a tree).
class ModelError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class CoverageError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class PartitionError : public Error {
 public:
  using Error::Error;
};

class PlanningError : public Error {
 public:
  using Error::Error;
};

class RoutingError : public Error {
 public:
  using Error::Error;
};

}  // namespace canalplan
