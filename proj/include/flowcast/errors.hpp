#pragma once

#include <stdexcept>
#include <string>

namespace flowcast {

// Base for every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input data (bad timestamp, broken CSV/XES structure).
struct ParseError : Error {
  using Error::Error;
};

// Well-formed input that does not carry what we need (missing column, empty training set).
struct SchemaError : Error {
  using Error::Error;
};

// Invalid configuration values.
struct ConfigError : Error {
  using Error::Error;
};

// Non-finite activations or parameters during training / inference.
struct NumericFault : Error {
  using Error::Error;
};

// Corrupted or incompatible model file.
struct BundleError : Error {
  using Error::Error;
};

}  // namespace flowcast
