#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pscnn {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Instruction field outside its encodable range.
class EncodingError : public Error {
 public:
  EncodingError(std::string field, const std::string& what)
      : Error("encoding error: field '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A 32-bit word that does not decode to any instruction.
class DecodeError : public Error {
 public:
  DecodeError(std::uint32_t word, const std::string& what);
  std::uint32_t word() const noexcept { return word_; }

 private:
  std::uint32_t word_;
};

class IllegalOpcode : public DecodeError {
 public:
  explicit IllegalOpcode(std::uint32_t word);
};

class AssemblyError : public Error {
 public:
  AssemblyError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Out-of-range index or count handed to a hardware model.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Fatal condition raised while the controller executes a program.
class SimulationError : public Error {
 public:
  SimulationError(std::uint64_t cycle, const std::string& what)
      : Error("cycle " + std::to_string(cycle) + ": " + what), cycle_(cycle) {}
  std::uint64_t cycle() const noexcept { return cycle_; }

 private:
  std::uint64_t cycle_;
};

/// Model description violates a mapping constraint.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Model is valid but cannot be placed on the hardware.
class CompileError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace pscnn
