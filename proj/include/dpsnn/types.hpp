#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpsnn {

using Gid = std::uint32_t;
using WorkerId = std::uint32_t;
using TimeMs = std::int32_t;
using Bytes = std::vector<std::uint8_t>;

// Sentinel for "no spike yet" / "never delivered".
inline constexpr TimeMs kNever = std::numeric_limits<TimeMs>::min();

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration value. `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class ConstructionError : public Error {
 public:
  using Error::Error;
};

// Non-finite membrane state; carries the neuron gid once known.
class NumericDivergence : public Error {
 public:
  explicit NumericDivergence(const std::string& what, std::int64_t gid = -1)
      : Error(what), gid_(gid) {}
  std::int64_t gid() const noexcept { return gid_; }

 private:
  std::int64_t gid_;
};

class FabricError : public Error {
 public:
  using Error::Error;
};

// Announced and delivered payloads disagree.
class ProtocolError : public FabricError {
 public:
  using FabricError::FabricError;
};

}  // namespace dpsnn
