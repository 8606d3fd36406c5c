#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace semc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Assets disagree with each other (unknown type, unresolved lexicon, ...).
struct ConfigError : Error {
  using Error::Error;
};

/// Malformed input file; line/column are 1-based, 0 when unknown.
struct ParseError : Error {
  ParseError(const std::string& where, std::size_t line, std::size_t col, const std::string& msg)
      : Error(where + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg),
        line(line),
        col(col) {}
  std::size_t line;
  std::size_t col;
};

}  // namespace semc
