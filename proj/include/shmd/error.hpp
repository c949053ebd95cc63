#pragma once

#include <stdexcept>
#include <string>

namespace shmd {

/// Runtime failure inside the pipeline (bad data, divergence, violated invariant).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration. `field` is a dotted path into the config.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace shmd
