#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace forgetbench {

/// Root of every exception the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; the message names the file and the 1-based line.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

class ValidationError : public Error {
  using Error::Error;
};
class ConfigError : public Error {
  using Error::Error;
};
class LookupError : public Error {
  using Error::Error;
};
class ShapeError : public Error {
  using Error::Error;
};
class DomainError : public Error {
  using Error::Error;
};
/// A caller broke a documented precondition.
class ContractError : public Error {
  using Error::Error;
};
class ScoringError : public Error {
  using Error::Error;
};
class TrainingError : public Error {
  using Error::Error;
};
class EstimationError : public Error {
  using Error::Error;
};
class FeatureError : public Error {
  using Error::Error;
};
class FitError : public Error {
  using Error::Error;
};
class IoError : public Error {
  using Error::Error;
};

// Non-fatal diagnostics go through a process-wide sink (stderr by default).
using WarningSink = std::function<void(std::string_view)>;
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);

}  // namespace forgetbench
