#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace countlab {

// Root of every error the library throws. Subclasses carry the data a caller
// needs to report the failure (index, line, timestep).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NegativeDepth : public Error {
 public:
  explicit NegativeDepth(std::size_t index)
      : Error("closing bracket at depth 0 (index " + std::to_string(index) + ")"),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class UnbalancedWord : public Error {
 public:
  explicit UnbalancedWord(int final_depth)
      : Error("word ends at depth " + std::to_string(final_depth)),
        final_depth_(final_depth) {}
  int final_depth() const noexcept { return final_depth_; }

 private:
  int final_depth_;
};

class GenerationStalled : public Error {
 public:
  using Error::Error;
};

class IndivisibleLength : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NonFinite : public Error {
 public:
  explicit NonFinite(std::size_t timestep)
      : Error("non-finite value at timestep " + std::to_string(timestep)),
        timestep_(timestep) {}
  std::size_t timestep() const noexcept { return timestep_; }

 private:
  std::size_t timestep_;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class NonPositiveLoss : public Error {
 public:
  using Error::Error;
};

class DegenerateX : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Bad or inconsistent experiment configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing or malformed input data, checkpoints, or reports (CLI exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace countlab
