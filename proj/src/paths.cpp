#include "sea/paths.hpp"

#include <vector>

namespace sea::paths {

std::string normalize(std::string_view absolute) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < absolute.size()) {
    while (i < absolute.size() && absolute[i] == '/') ++i;
    std::size_t j = i;
    while (j < absolute.size() && absolute[j] != '/') ++j;
    std::string_view part = absolute.substr(i, j - i);
    i = j;
    if (part.empty() || part == ".") continue;
    if (part == "..") {
      if (!parts.empty()) parts.pop_back();
      continue;
    }
    parts.push_back(part);
  }
  if (parts.empty()) return "/";
  std::string out;
  for (auto part : parts) {
    out.push_back('/');
    out.append(part);
  }
  return out;
}

static std::string_view trim_trailing(std::string_view p) {
  while (p.size() > 1 && p.back() == '/') p.remove_suffix(1);
  return p;
}

bool has_prefix(std::string_view path, std::string_view prefix) {
  return strip_prefix(path, prefix).has_value();
}

std::optional<std::string> strip_prefix(std::string_view path,
                                        std::string_view prefix) {
  path = trim_trailing(path);
  prefix = trim_trailing(prefix);
  if (prefix == "/") {
    if (path.empty() || path[0] != '/') return std::nullopt;
    std::size_t k = 0;
    while (k < path.size() && path[k] == '/') ++k;
    return std::string(path.substr(k));
  }
  if (path.size() < prefix.size() || path.substr(0, prefix.size()) != prefix)
    return std::nullopt;
  if (path.size() == prefix.size()) return std::string();
  if (path[prefix.size()] != '/') return std::nullopt;
  std::size_t k = prefix.size();
  while (k < path.size() && path[k] == '/') ++k;
  return std::string(path.substr(k));
}

std::string join(std::string_view root, std::string_view relative) {
  root = trim_trailing(root);
  while (!relative.empty() && relative.front() == '/') relative.remove_prefix(1);
  std::string out(root);
  if (relative.empty()) return out;
  if (out.empty() || out.back() != '/') out.push_back('/');
  out.append(relative);
  return out;
}

std::string parent(std::string_view path) {
  path = trim_trailing(path);
  auto pos = path.rfind('/');
  if (pos == std::string_view::npos) return ".";
  if (pos == 0) return "/";
  return std::string(path.substr(0, pos));
}

}  // namespace sea::paths
