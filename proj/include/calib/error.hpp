#pragma once

#include <stdexcept>
#include <string>

namespace calib {

// Error taxonomy shared by the whole toolkit. The CLI maps each kind to a
// distinct exit code, so constructors and parsers must pick the right one.
enum class ErrorKind {
  InvalidArgument,  // bad parameter value (weights, temperature, config)
  Dimension,        // shape mismatch between batches/labels/features
  Parse,            // malformed file content
  Range,            // out-of-range value (label index, confidence)
  Numeric,          // numerical failure (divergence, non-finite results)
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

}  // namespace calib
