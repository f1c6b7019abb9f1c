#pragma once

#include <stdexcept>
#include <string>

namespace pseg {

// Violated precondition or invariant of a library operation.
// The CLI maps this to exit code 3.
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// Malformed configuration, schema, or input file.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

inline void require_contract(bool ok, const std::string& msg) {
  if (!ok) throw ContractViolation(msg);
}

inline void require_config(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace pseg
