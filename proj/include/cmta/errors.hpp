#pragma once

#include <stdexcept>
#include <string>

namespace cmta {

// Invalid shapes, hyperparameters, or variant/parameter mismatches.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class LoadErrorKind {
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kNonFinite,
  kMalformed,
  kMissingFile,
  kEmpty,
};

const char* to_string(LoadErrorKind kind);

// Failure to read a .cmta clip, a manifest, or a checkpoint.
class LoadError : public std::runtime_error {
 public:
  LoadError(LoadErrorKind kind, const std::string& path, const std::string& detail);
  LoadErrorKind kind() const { return kind_; }
  const std::string& path() const { return path_; }

 private:
  LoadErrorKind kind_;
  std::string path_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A metric whose precondition fails (e.g. AUC with a single class).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Raised when a gradient or loss stops being finite during training.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cmta
