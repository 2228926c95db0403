#pragma once

#include <stdexcept>
#include <string>

namespace tmd {

// Invalid shapes, unknown names, malformed configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf encountered in a forward or backward pass.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation invoked in the wrong state (backward without a recorded forward,
// optimizer step without gradients, log applied twice).
class StateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dataset files missing or malformed. Carries file and line when known.
class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& what, std::string file = {}, long line = -1)
      : std::runtime_error(format(what, file, line)), file_(std::move(file)), line_(line) {}

  const std::string& file() const { return file_; }
  long line() const { return line_; }

 private:
  static std::string format(const std::string& what, const std::string& file, long line) {
    std::string out;
    if (!file.empty()) {
      out += file;
      if (line >= 0) out += ":" + std::to_string(line);
      out += ": ";
    }
    return out + what;
  }

  std::string file_;
  long line_;
};

// A training run aborted (non-finite loss).
class RunFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tmd
