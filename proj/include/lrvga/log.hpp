#pragma once

#include <string_view>

namespace lrvga::log {

// Warnings go to stderr unless silenced. Counting survives silencing so tests
// can assert that a fallback path was taken.
void warn(std::string_view message);
void set_quiet(bool quiet);
long warning_count();

}  // namespace lrvga::log
