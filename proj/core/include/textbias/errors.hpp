#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace textbias {

// Bad arguments or configuration: out-of-range knobs, unknown field names,
// malformed config files.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inconsistent or malformed data: empty cells, unbalanced datasets,
// mismatched tables.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input record; remembers the 1-based line number.
struct ParseError : DataError {
  ParseError(std::size_t line_number, const std::string& message)
      : DataError("line " + std::to_string(line_number) + ": " + message),
        line(line_number) {}
  std::size_t line;
};

}  // namespace textbias
