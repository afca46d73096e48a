#pragma once

#include <stdexcept>
#include <string>

namespace resdiff {

// Error categories map one-to-one onto CLI exit codes (2, 3, 4).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] void throw_data(const std::string& module, const std::string& what);
[[noreturn]] void throw_numeric(const std::string& module, const std::string& what);
[[noreturn]] void throw_config(const std::string& module, const std::string& what);

}  // namespace resdiff
