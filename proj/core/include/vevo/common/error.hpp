#pragma once

#include <stdexcept>
#include <string>

namespace vevo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents (WAV header, checkpoint, container magic).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Audio with an unsupported channel layout.
class ChannelError : public Error {
 public:
  using Error::Error;
};

/// An argument outside its documented domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Tensor or matrix shapes that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf appeared in a computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Text or token ids that the vocabulary cannot represent.
class VocabularyError : public Error {
 public:
  using Error::Error;
};

/// A task recipe with a missing or inconsistent input slot.
class RecipeError : public Error {
 public:
  using Error::Error;
};

}  // namespace vevo
