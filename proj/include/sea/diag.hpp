#pragma once

#include <string_view>

// Diagnostics on standard error, every line prefixed "sea:". The verbosity
// comes from SEA_DEBUG (0 silent, 1 placement decisions, 2 every call);
// warnings and errors are always printed.
namespace sea::diag {

int level();
void set_level(int level);

void message(std::string_view text);
void warn(std::string_view text);
void debug(int min_level, std::string_view text);

}  // namespace sea::diag
