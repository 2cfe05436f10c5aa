#pragma once

#include <stdexcept>
#include <string>

namespace nab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition on an argument violated (range, size, shape).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A dataset file or directory could not be read.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// A dataset record is present but malformed.
class IntegrityError : public Error {
 public:
  IntegrityError(std::size_t record_index, const std::string& what)
      : Error("record " + std::to_string(record_index) + ": " + what),
        record_index_(record_index) {}

  std::size_t record_index() const noexcept { return record_index_; }

 private:
  std::size_t record_index_;
};

/// Container or checkpoint file has a bad header, version or length.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Object used in a state that does not support the call (e.g. untrained model).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Metric requested over an empty population.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class TrainingDivergedError : public Error {
 public:
  explicit TrainingDivergedError(int epoch)
      : Error("training diverged (non-finite loss) at epoch " + std::to_string(epoch)),
        epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// Invalid experiment configuration (unknown key, bad value, unknown component name).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Error raised while executing a pipeline stage; carries the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace nab
