#include <algorithm>

#include "strata/analyzers.hpp"
#include "strata/paths.hpp"

namespace strata {

namespace {

struct Stanza {
  std::string package;
  std::string version;
  std::string status;
  std::string architecture;
  bool saw_field = false;
};

// Third word of the Status field carries the state ("install ok installed").
bool status_installed(std::string_view status) {
  size_t first = status.find(' ');
  if (first == std::string_view::npos) return false;
  size_t second = status.find(' ', first + 1);
  if (second == std::string_view::npos) return false;
  std::string_view third = status.substr(second + 1);
  size_t end = third.find(' ');
  if (end != std::string_view::npos) third = third.substr(0, end);
  return third == "installed";
}

}  // namespace

std::vector<Package> parse_dpkg_status(std::string_view content, const SquashedView& view,
                                       const LayerStore& store,
                                       std::vector<AnalyzerWarning>* warnings,
                                       const std::string& status_path) {
  std::vector<Package> packages;
  size_t skipped = 0;

  // locate the info directory next to whichever status file we are reading;
  // the standard location is /var/lib/dpkg/info
  auto find_info_list = [&](const Stanza& st) -> const FileEntry* {
    for (const char* root : {"/var/lib/dpkg/info/", "/usr/lib/dpkg/info/"}) {
      if (!st.architecture.empty()) {
        if (const FileEntry* e = view.find(root + st.package + ":" + st.architecture + ".list")) {
          return e;
        }
      }
      if (const FileEntry* e = view.find(root + st.package + ".list")) return e;
    }
    return nullptr;
  };

  auto flush = [&](Stanza& st) {
    if (!st.saw_field) return;
    if (st.package.empty()) {
      ++skipped;
      st = Stanza{};
      return;
    }
    if (!status_installed(st.status)) {  // deinstall/config-files residue
      st = Stanza{};
      return;
    }
    Package pkg;
    pkg.ecosystem = Ecosystem::deb;
    pkg.name = st.package;
    if (!st.version.empty()) pkg.version = st.version;
    else pkg.degraded = true;
    pkg.metadata_files.push_back(status_path);
    if (const FileEntry* list_entry = find_info_list(st)) {
      pkg.metadata_files.push_back(list_entry->path);
      std::string_view list(store.read(*list_entry));
      size_t pos = 0;
      while (pos < list.size()) {
        size_t eol = list.find('\n', pos);
        if (eol == std::string_view::npos) eol = list.size();
        std::string_view line = list.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty() || line == "/.") continue;
        if (auto normalized = normalize_tar_path(line)) {
          pkg.owned_files.push_back(*normalized);
        }
      }
    }
    packages.push_back(std::move(pkg));
    st = Stanza{};
  };

  Stanza current;
  std::string last_field;
  size_t pos = 0;
  while (pos <= content.size()) {
    size_t eol = content.find('\n', pos);
    if (eol == std::string_view::npos) eol = content.size();
    std::string_view line = content.substr(pos, eol - pos);
    pos = eol + 1;
    if (eol == content.size() && line.empty() && pos > content.size()) break;

    if (line.empty()) {
      flush(current);
      last_field.clear();
      if (pos > content.size()) break;
      continue;
    }
    if (line.front() == ' ' || line.front() == '\t') continue;  // continuation

    size_t colon = line.find(':');
    if (colon == std::string_view::npos) {
      if (warnings != nullptr) {
        warnings->push_back({"dpkg", "stanza line without field separator: " +
                                         std::string(line.substr(0, 60))});
      }
      ++skipped;
      continue;
    }
    std::string_view field = line.substr(0, colon);
    std::string_view value = line.substr(colon + 1);
    while (!value.empty() && value.front() == ' ') value.remove_prefix(1);

    current.saw_field = true;
    if (field == "Package") current.package = std::string(value);
    else if (field == "Version") current.version = std::string(value);
    else if (field == "Status") current.status = std::string(value);
    else if (field == "Architecture") current.architecture = std::string(value);
    if (pos > content.size()) break;
  }
  flush(current);

  if (skipped > 0 && warnings != nullptr) {
    warnings->push_back({"dpkg", std::to_string(skipped) + " malformed stanza(s) skipped"});
  }
  return packages;
}

}  // namespace strata
