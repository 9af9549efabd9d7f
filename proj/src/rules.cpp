#include "sea/rules.hpp"

#include <fnmatch.h>

#include <cctype>
#include <fstream>
#include <sstream>

namespace sea {

std::string_view to_string(LifecycleMode mode) {
  switch (mode) {
    case LifecycleMode::keep: return "keep";
    case LifecycleMode::copy: return "copy";
    case LifecycleMode::remove: return "remove";
    case LifecycleMode::move: return "move";
  }
  return "?";
}

PatternList::PatternList(std::vector<std::string> patterns) {
  for (auto& p : patterns) {
    p.erase(0, p.find_first_not_of('/'));
    if (!p.empty()) patterns_.push_back(std::move(p));
  }
}

PatternList PatternList::parse(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    auto line = text.substr(pos, eol - pos);
    pos = eol + 1;
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
      line.remove_suffix(1);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front())))
      line.remove_prefix(1);
    if (line.empty() || line.front() == '#') continue;
    out.emplace_back(line);
  }
  return PatternList(std::move(out));
}

PatternList PatternList::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) return {};
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

bool PatternList::matches(std::string_view relative) const {
  while (!relative.empty() && relative.front() == '/') relative.remove_prefix(1);
  std::string rel(relative);
  for (const auto& p : patterns_)
    if (::fnmatch(p.c_str(), rel.c_str(), 0) == 0) return true;
  return false;
}

RuleSet load_rules(const SeaConfig& cfg) {
  return RuleSet{PatternList::load(cfg.flushlist_path), PatternList::load(cfg.evictlist_path),
                 PatternList::load(cfg.prefetchlist_path)};
}

}  // namespace sea
