#pragma once

#include <stdexcept>
#include <string>

namespace timecheck {

/// Invalid configuration. field() names the offending key path, e.g.
/// "weight.ntp" or "profiles:12" for a line in a profile file.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace timecheck
