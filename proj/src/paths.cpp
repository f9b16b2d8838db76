#include "strata/paths.hpp"

#include <vector>

namespace strata {

std::optional<std::string> normalize_tar_path(std::string_view member) {
  std::vector<std::string_view> segments;
  size_t pos = 0;
  while (pos <= member.size()) {
    size_t next = member.find('/', pos);
    if (next == std::string_view::npos) next = member.size();
    std::string_view seg = member.substr(pos, next - pos);
    if (seg.empty() || seg == ".") {
      // skip
    } else if (seg == "..") {
      if (segments.empty()) return std::nullopt;
      segments.pop_back();
    } else {
      segments.push_back(seg);
    }
    pos = next + 1;
  }
  std::string out = "/";
  for (size_t i = 0; i < segments.size(); ++i) {
    if (i != 0) out.push_back('/');
    out.append(segments[i]);
  }
  if (segments.empty()) {
    // "." or "./" members name the root itself
    bool only_dots = true;
    for (char c : member) {
      if (c != '.' && c != '/') { only_dots = false; break; }
    }
    if (!only_dots || member.find("..") != std::string_view::npos) return std::nullopt;
  }
  return out;
}

std::string_view basename_of(std::string_view path) {
  size_t slash = path.rfind('/');
  if (slash == std::string_view::npos) return path;
  return path.substr(slash + 1);
}

std::string_view parent_of(std::string_view path) {
  if (path == "/" || path.empty()) return "/";
  size_t slash = path.rfind('/');
  if (slash == 0) return "/";
  return path.substr(0, slash);
}

bool is_under(std::string_view dir, std::string_view path) {
  if (dir == "/") return path.size() > 1 && path.front() == '/';
  if (path.size() <= dir.size() + 1) return false;
  return path.compare(0, dir.size(), dir) == 0 && path[dir.size()] == '/';
}

bool is_opaque_whiteout_name(std::string_view basename) {
  return basename == kOpaqueWhiteout;
}

bool is_whiteout_name(std::string_view basename) {
  return basename.rfind(kWhiteoutPrefix, 0) == 0 && !is_opaque_whiteout_name(basename);
}

std::string whiteout_target(std::string_view normalized_path) {
  std::string_view base = basename_of(normalized_path);
  std::string_view parent = parent_of(normalized_path);
  base.remove_prefix(kWhiteoutPrefix.size());
  std::string out(parent);
  if (out.back() != '/') out.push_back('/');
  out.append(base);
  return out;
}

}  // namespace strata
