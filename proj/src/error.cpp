#include "resdiff/error.hpp"

namespace resdiff {

void throw_data(const std::string& module, const std::string& what) {
  throw DataError(module + ": " + what);
}

void throw_numeric(const std::string& module, const std::string& what) {
  throw NumericError(module + ": " + what);
}

void throw_config(const std::string& module, const std::string& what) {
  throw ConfigError(module + ": " + what);
}

}  // namespace resdiff
