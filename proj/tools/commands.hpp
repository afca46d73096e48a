#pragma once

#include <string>
#include <vector>

namespace resdiff::cli {

/// Exit codes: 0 ok, 2 config or usage error, 3 data error, 4 numeric failure.
int cli_main(const std::vector<std::string>& args);
int cli_main(int argc, char** argv);

}  // namespace resdiff::cli
