#pragma once

#include <stdexcept>
#include <string>

namespace gazelign {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad caller input: out-of-range indices, length mismatches, broken invariants.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Subword alignment does not cover the document.
class AlignmentError : public InputError {
 public:
  AlignmentError(const std::string& what, std::size_t word_index)
      : InputError(what), word_index_(word_index) {}
  std::size_t word_index() const noexcept { return word_index_; }

 private:
  std::size_t word_index_;
};

/// A gaze trial whose total reading time is zero.
class EmptyPatternError : public InputError {
 public:
  using InputError::InputError;
};

/// A metric is mathematically undefined for the given input
/// (single-class masks, zero evidence, constant vectors).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class IncompleteRankingError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace gazelign
