#include <cctype>

#include "strata/analyzers.hpp"
#include "strata/paths.hpp"

namespace strata {

std::string_view to_string(Ecosystem ecosystem) {
  switch (ecosystem) {
    case Ecosystem::deb: return "deb";
    case Ecosystem::apk: return "apk";
    case Ecosystem::rpm: return "rpm";
    case Ecosystem::pypi: return "pypi";
    case Ecosystem::npm: return "npm";
    case Ecosystem::gem: return "gem";
    case Ecosystem::composer: return "composer";
    case Ecosystem::golang: return "golang";
    case Ecosystem::external: return "external";
  }
  return "external";
}

std::string_view to_string(Provenance provenance) {
  return provenance == Provenance::installed ? "installed" : "declared";
}

namespace {

std::string strip_quotes(std::string_view v) {
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') ||
                        (v.front() == '\'' && v.back() == '\''))) {
    return std::string(v.substr(1, v.size() - 2));
  }
  return std::string(v);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

OsRelease parse_os_release(std::string_view content, std::string source_path) {
  OsRelease os;
  os.source_path = std::move(source_path);

  size_t pos = 0;
  while (pos < content.size()) {
    size_t eol = content.find('\n', pos);
    if (eol == std::string_view::npos) eol = content.size();
    std::string_view line = trim(content.substr(pos, eol - pos));
    pos = eol + 1;
    if (line.empty() || line.front() == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string_view::npos) continue;
    std::string_view key = line.substr(0, eq);
    std::string value = strip_quotes(trim(line.substr(eq + 1)));
    if (key == "ID") os.os_id = value;
    else if (key == "VERSION_ID") os.version_id = value;
  }
  return os;
}

std::optional<OsRelease> detect_os(const SquashedView& view, const LayerStore& store) {
  auto read_at = [&](const std::string& path) -> std::optional<std::string> {
    const FileEntry* entry = view.find(path);
    if (entry == nullptr || (entry->kind != FileKind::regular && entry->kind != FileKind::hardlink)) {
      return std::nullopt;
    }
    return std::string(store.read(*entry));
  };

  for (const char* path : {"/etc/os-release", "/usr/lib/os-release"}) {
    if (auto content = read_at(path)) {
      OsRelease os = parse_os_release(*content, path);
      if (!os.os_id.empty() || os.version_id) return os;
      return os;  // file exists but is empty of IDs; still a detection
    }
  }

  // /etc/*-release family (centos-release, alpine-release, ...)
  for (const auto& [path, entry] : view.files) {
    if (parent_of(path) != "/etc") continue;
    std::string_view base = basename_of(path);
    if (base.size() <= 8 || base.substr(base.size() - 8) != "-release") continue;
    if (base == "os-release") continue;
    if (entry.kind != FileKind::regular && entry.kind != FileKind::hardlink) continue;
    std::string content(store.read(entry));
    OsRelease os = parse_os_release(content, path);
    if (os.os_id.empty()) {
      // e.g. "CentOS Linux release 7.9.2009 (Core)" or alpine's bare "3.19.1"
      os.os_id = lower(base.substr(0, base.size() - 8));
      std::string_view text = trim(content);
      size_t digit = text.find_first_of("0123456789");
      if (digit != std::string_view::npos) {
        size_t end = digit;
        while (end < text.size() &&
               (std::isdigit(static_cast<unsigned char>(text[end])) || text[end] == '.')) {
          ++end;
        }
        os.version_id = std::string(text.substr(digit, end - digit));
      }
    }
    return os;
  }

  if (auto content = read_at("/etc/debian_version")) {
    OsRelease os;
    os.source_path = "/etc/debian_version";
    os.os_id = "debian";
    std::string_view v = trim(*content);
    if (!v.empty()) os.version_id = std::string(v);
    return os;
  }
  return std::nullopt;
}

}  // namespace strata
