#pragma once

#include <stdexcept>
#include <string>

namespace purekit {

// Error categories map onto CLI exit codes: config -> 3, everything else -> 4.
// Usage errors (bad flags) are handled by the argument parser itself.
enum class ErrorKind {
  parameter,   // precondition violated on an API call
  config,      // invalid run configuration / unknown key
  capability,  // operation not supported by the given object (e.g. mode mismatch)
  integrity,   // corrupted or inconsistent persisted data
  parse,       // malformed input file
  runtime,     // numerical or environmental failure at run time
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_parameter(const std::string& msg) {
  throw Error(ErrorKind::parameter, msg);
}
[[noreturn]] inline void throw_config(const std::string& msg) {
  throw Error(ErrorKind::config, msg);
}
[[noreturn]] inline void throw_capability(const std::string& msg) {
  throw Error(ErrorKind::capability, msg);
}
[[noreturn]] inline void throw_integrity(const std::string& msg) {
  throw Error(ErrorKind::integrity, msg);
}
[[noreturn]] inline void throw_parse(const std::string& msg) {
  throw Error(ErrorKind::parse, msg);
}
[[noreturn]] inline void throw_runtime(const std::string& msg) {
  throw Error(ErrorKind::runtime, msg);
}

}  // namespace purekit
