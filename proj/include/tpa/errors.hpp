#pragma once

#include <stdexcept>
#include <string>

namespace tpa {

// CLI exit codes, one per error category.
enum class ExitCode : int {
  Ok = 0,
  Internal = 1,
  Config = 2,
  Io = 3,
  Numeric = 4,
  Compatibility = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(ExitCode::Config, msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(ExitCode::Io, msg) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(ExitCode::Numeric, msg) {}
};

struct CompatibilityError : Error {
  explicit CompatibilityError(const std::string& msg) : Error(ExitCode::Compatibility, msg) {}
};

// Shape mismatches surface as configuration problems at the CLI boundary.
struct DimensionError : ConfigError {
  explicit DimensionError(const std::string& msg) : ConfigError(msg) {}
};

struct IntegrityError : ConfigError {
  explicit IntegrityError(const std::string& msg) : ConfigError(msg) {}
};

}  // namespace tpa
