#pragma once

#include <stdexcept>
#include <string>

namespace squim {

// Base class for all errors thrown by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad numeric input or violated precondition.
struct ValueError : Error {
  using Error::Error;
};

// Tensor/sequence dimension incompatibility (lengths, rates, shapes).
struct ShapeError : Error {
  using Error::Error;
};

// Filesystem or stream failure.
struct IoError : Error {
  using Error::Error;
};

// WAV container is structurally invalid.
struct WavFormatError : Error {
  using Error::Error;
};

// WAV has more than one channel.
struct MultiChannelError : Error {
  using Error::Error;
};

// WAV encoding other than 16-bit PCM or 32-bit IEEE float.
struct UnsupportedEncodingError : Error {
  using Error::Error;
};

// Problems in a key/value configuration file.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace squim
