#pragma once

#include <stdexcept>
#include <string>

namespace cstg {

// Error taxonomy shared across the library. The CLI maps kinds to exit
// codes (config -> 2, io/format -> 4, everything else -> 3).
enum class ErrorKind {
  dimension,   // tensor/matrix shape disagreement
  config,      // invalid configuration or arguments
  data,        // bad values in user data
  format,      // malformed file contents
  io,          // filesystem failures
  training,    // divergence or other runtime training failure
  contract,    // API precondition violated
  metric,      // metric undefined for the given inputs
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& msg) : Error(ErrorKind::dimension, msg) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(ErrorKind::config, msg) {}
};
struct DataError : Error {
  explicit DataError(const std::string& msg) : Error(ErrorKind::data, msg) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& msg) : Error(ErrorKind::format, msg) {}
};
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(ErrorKind::io, msg) {}
};
struct TrainingError : Error {
  explicit TrainingError(const std::string& msg) : Error(ErrorKind::training, msg) {}
};
struct ContractError : Error {
  explicit ContractError(const std::string& msg) : Error(ErrorKind::contract, msg) {}
};
struct MetricError : Error {
  explicit MetricError(const std::string& msg) : Error(ErrorKind::metric, msg) {}
};

}  // namespace cstg
