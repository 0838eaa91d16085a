#pragma once

#include <stdexcept>
#include <string>

namespace mmgn {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or dimension disagreement between operands.
struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// A forward op produced NaN/Inf, or a gradient went non-finite.
struct NonFiniteError : Error {
  explicit NonFiniteError(const std::string& msg) : Error(msg) {}
};

// SMILES syntax or valence violation.
struct ParseError : Error {
  explicit ParseError(const std::string& msg) : Error(msg) {}
};

struct VocabError : Error {
  explicit VocabError(const std::string& msg) : Error(msg) {}
};

struct CheckpointError : Error {
  explicit CheckpointError(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace mmgn
