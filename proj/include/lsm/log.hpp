#pragma once

#include <string>

namespace lsm {

/// Warnings go to stderr; set_quiet(true) silences them (tests, benchmarks).
void log_warning(const std::string& message);
void log_info(const std::string& message);
void set_quiet(bool quiet);

}  // namespace lsm
