#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace vnjp {

/// Base class for every error raised by the pipeline.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid UTF-8 in an input; the message names the offending byte offset.
class DecodeError : public Error {
 public:
  explicit DecodeError(std::size_t byte_offset)
      : Error("invalid UTF-8 at byte offset " + std::to_string(byte_offset)),
        byte_offset_(byte_offset) {}

  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

/// Malformed record in an input file; messages carry the line number.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Violated data invariant (duplicate ids, missing sides, bad merges).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration value or unusable config file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Prompt template missing a required placeholder.
class TemplateError : public Error {
 public:
  using Error::Error;
};

/// Final translation could not be extracted from a generation. Carries the
/// raw backend output so failed sentences can be audited.
class ExtractionError : public Error {
 public:
  ExtractionError(const std::string& message, std::string raw_output)
      : Error(message), raw_output_(std::move(raw_output)) {}

  const std::string& raw_output() const { return raw_output_; }

 private:
  std::string raw_output_;
};

/// Backend transport failure. Retryable errors (timeouts, 5xx, 429) may be
/// re-attempted by the retry policy; non-retryable ones fail immediately.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, bool retryable)
      : Error(message), retryable_(retryable) {}

  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

}  // namespace vnjp
