#pragma once

#include <stdexcept>
#include <string>

namespace recprompt {

// Failure classes map one-to-one onto the CLI exit codes (1, 2, 3).
enum class ErrorKind {
  kConfig = 1,
  kData = 2,
  kService = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] void throw_config_error(const std::string& message);
[[noreturn]] void throw_data_error(const std::string& message);
[[noreturn]] void throw_service_error(const std::string& message);

}  // namespace recprompt
