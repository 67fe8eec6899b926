#pragma once

#include <stdexcept>
#include <string>

namespace ulcnn {

/// Error families. The numeric value doubles as the CLI exit code.
enum class ErrorKind {
  Config = 2,   // invalid configuration or arguments
  Data = 3,     // malformed data or file format
  Numeric = 4,  // non-finite values, singular statistics
  Io = 5,       // filesystem failures
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_config(const std::string& msg) { throw Error(ErrorKind::Config, msg); }
[[noreturn]] inline void fail_data(const std::string& msg) { throw Error(ErrorKind::Data, msg); }
[[noreturn]] inline void fail_numeric(const std::string& msg) { throw Error(ErrorKind::Numeric, msg); }
[[noreturn]] inline void fail_io(const std::string& msg) { throw Error(ErrorKind::Io, msg); }

}  // namespace ulcnn
