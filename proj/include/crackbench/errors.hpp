#pragma once

#include <stdexcept>
#include <string>

namespace crackbench {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments or option values supplied by the caller.
class UsageError : public Error {
public:
  using Error::Error;
};

/// Missing paths, unknown registry names, unreadable weight stores.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Bad input data: empty datasets, malformed files, wrong tensor shapes.
class DataError : public Error {
public:
  using Error::Error;
};

/// Failures raised while training or evaluating a model.
class TrainingError : public Error {
public:
  using Error::Error;
};

} // namespace crackbench
