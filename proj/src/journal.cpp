#include "sea/journal.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <fstream>
#include <stdexcept>
#include <system_error>

#include "json.hpp"

namespace sea {

std::string_view to_string(FlushState s) {
  switch (s) {
    case FlushState::dirty: return "dirty";
    case FlushState::flushing: return "flushing";
    case FlushState::flushed: return "flushed";
    case FlushState::evicted: return "evicted";
  }
  return "?";
}

std::optional<FlushState> parse_flush_state(std::string_view s) {
  for (auto st : {FlushState::dirty, FlushState::flushing, FlushState::flushed,
                  FlushState::evicted})
    if (to_string(st) == s) return st;
  return std::nullopt;
}

FlushJournal::FlushJournal(std::filesystem::path file) : file_(std::move(file)) {
  std::ifstream in(file_);
  std::string line;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      ++skipped_;
      continue;
    }
    try {
      auto state = parse_flush_state(j.at("state").get<std::string>());
      if (!state) {
        ++skipped_;
        continue;
      }
      Key key{j.at("path").get<std::string>(),
              FileVersion{j.at("size").get<std::uint64_t>(),
                          j.at("mtime_ns").get<std::int64_t>()}};
      auto& e = entries_[key];
      if (*state >= e.state) {
        e.state = *state;
        if (j.contains("sha256")) e.sha256 = j["sha256"].get<std::string>();
      }
      latest_[key.first] = *state;
    } catch (const nlohmann::json::exception&) {
      ++skipped_;
    }
  }
  fd_ = ::open(file_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0)
    throw std::system_error(errno, std::generic_category(), "open " + file_.string());
}

FlushJournal::~FlushJournal() {
  if (fd_ >= 0) ::close(fd_);
}

JournalEntry FlushJournal::get(const std::string& relative, const FileVersion& v) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(Key{relative, v});
  return it == entries_.end() ? JournalEntry{} : it->second;
}

void FlushJournal::record(const std::string& relative, const FileVersion& v,
                          FlushState state, const std::string& sha256,
                          bool allow_direct_evict) {
  std::lock_guard lock(mu_);
  auto& e = entries_[Key{relative, v}];
  if (state < e.state)
    throw std::logic_error("journal regression for " + relative + ": " +
                           std::string(to_string(e.state)) + " -> " +
                           std::string(to_string(state)));
  if (state == FlushState::evicted && e.state < FlushState::flushed && !allow_direct_evict)
    throw std::logic_error("evicting unflushed " + relative);

  nlohmann::json j{{"path", relative},
                   {"size", v.size},
                   {"mtime_ns", v.mtime_ns},
                   {"state", to_string(state)}};
  if (!sha256.empty()) j["sha256"] = sha256;
  std::string line = j.dump() + "\n";
  if (::write(fd_, line.data(), line.size()) != ssize_t(line.size()))
    throw std::system_error(errno, std::generic_category(), "append " + file_.string());

  e.state = state;
  if (!sha256.empty()) e.sha256 = sha256;
  latest_[relative] = state;
}

std::map<std::string, FlushState> FlushJournal::latest() const {
  std::lock_guard lock(mu_);
  return latest_;
}

}  // namespace sea
