#include "recprompt/error.hpp"

namespace recprompt {

void throw_config_error(const std::string& message) {
  throw Error(ErrorKind::kConfig, message);
}

void throw_data_error(const std::string& message) {
  throw Error(ErrorKind::kData, message);
}

void throw_service_error(const std::string& message) {
  throw Error(ErrorKind::kService, message);
}

}  // namespace recprompt
