#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace synood {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or configuration value.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Input could not be parsed. `offset()` is the byte offset of the failure.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Parsed input violates a record-level invariant.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::vector<std::uint64_t> record_ids = {})
      : Error(what), record_ids_(std::move(record_ids)) {}
  const std::vector<std::uint64_t>& record_ids() const noexcept { return record_ids_; }

 private:
  std::vector<std::uint64_t> record_ids_;
};

/// Binary archive ends early or is internally inconsistent.
class CorruptionError : public Error {
 public:
  CorruptionError(const std::string& what, std::size_t record_index)
      : Error(what + " (record " + std::to_string(record_index) + ")"), record_index_(record_index) {}
  std::size_t record_index() const noexcept { return record_index_; }

 private:
  std::size_t record_index_;
};

class EmptyResponseError : public Error {
 public:
  explicit EmptyResponseError(std::string raw)
      : Error("response contains no concepts: \"" + raw + "\""), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class PartialResultError : public Error {
 public:
  explicit PartialResultError(std::vector<std::string> short_labels);
  const std::vector<std::string>& short_labels() const noexcept { return short_labels_; }

 private:
  std::vector<std::string> short_labels_;
};

class EmptyMaskError : public Error {
 public:
  EmptyMaskError() : Error("mask has no foreground pixels") {}
};

class DegenerateVectorError : public Error {
 public:
  using Error::Error;
};

class PlanningError : public Error {
 public:
  using Error::Error;
};

class PairingError : public Error {
 public:
  PairingError(const std::string& what, std::vector<std::uint64_t> lineage_ids)
      : Error(what), lineage_ids_(std::move(lineage_ids)) {}
  const std::vector<std::uint64_t>& lineage_ids() const noexcept { return lineage_ids_; }

 private:
  std::vector<std::uint64_t> lineage_ids_;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, double learning_rate);
  std::size_t epoch() const noexcept { return epoch_; }
  double learning_rate() const noexcept { return learning_rate_; }

 private:
  std::size_t epoch_;
  double learning_rate_;
};

/// Base for every failure reported by a model backend.
class BackendError : public Error {
 public:
  using Error::Error;
};

/// Connection failures, timeouts and 5xx/429 responses. Retryable.
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Malformed or contract-violating exchange. Never retried.
class ProtocolError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Config value rejected; `field()` is the dotted path, e.g. "train.learning_rate".
class ConfigError : public ArgumentError {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : ArgumentError(field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A stage's upstream artifacts are missing or were produced under another config.
class DependencyError : public Error {
 public:
  DependencyError(const std::string& stage, const std::string& what) : Error(what), stage_(stage) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace synood
