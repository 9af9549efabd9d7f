#pragma once

#include <optional>
#include <string>
#include <string_view>

// Lexical path helpers on plain strings. These never touch the filesystem, so
// they are safe to call from inside the interposition layer.
namespace sea::paths {

// Collapses repeated separators, "." and ".." components. The input must be
// absolute; ".." at the root stays at the root.
std::string normalize(std::string_view absolute);

// True when path equals prefix or lies below it, compared by component.
bool has_prefix(std::string_view path, std::string_view prefix);

// The part of path below prefix without a leading separator ("" for the
// prefix itself), or nullopt when path is not within prefix.
std::optional<std::string> strip_prefix(std::string_view path,
                                        std::string_view prefix);

// Joins root and a relative remainder with exactly one separator.
std::string join(std::string_view root, std::string_view relative);

std::string parent(std::string_view path);

}  // namespace sea::paths
