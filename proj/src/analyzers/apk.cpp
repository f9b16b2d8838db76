#include "strata/analyzers.hpp"

namespace strata {

// apk v2 installed database: blank-line separated blocks of single-letter
// fields. P: name, V: version, F: directory (becomes current), R: file in
// the current directory.
std::vector<Package> parse_apk_installed(std::string_view content,
                                         std::vector<AnalyzerWarning>* warnings) {
  std::vector<Package> packages;

  Package current;
  bool in_block = false;
  std::string current_dir;

  auto flush = [&]() {
    if (!in_block) return;
    if (current.name.empty()) {
      if (warnings != nullptr) {
        warnings->push_back({"apk", "block without P: field skipped"});
      }
    } else {
      if (!current.version) {
        current.degraded = true;
        if (warnings != nullptr) {
          warnings->push_back({"apk", "package " + current.name + " lacks V: field"});
        }
      }
      packages.push_back(std::move(current));
    }
    current = Package{};
    current_dir.clear();
    in_block = false;
  };

  size_t pos = 0;
  while (pos <= content.size()) {
    size_t eol = content.find('\n', pos);
    if (eol == std::string_view::npos) eol = content.size();
    std::string_view line = content.substr(pos, eol - pos);
    bool at_end = eol == content.size();
    pos = eol + 1;

    if (line.empty()) {
      flush();
      if (at_end) break;
      continue;
    }
    if (line.size() < 2 || line[1] != ':') {
      if (warnings != nullptr && !in_block) {
        warnings->push_back({"apk", "unparseable line: " + std::string(line.substr(0, 40))});
      }
      if (at_end) break;
      continue;
    }
    if (!in_block) {
      in_block = true;
      current.ecosystem = Ecosystem::apk;
      current.metadata_files.push_back("/lib/apk/db/installed");
    }
    char field = line[0];
    std::string_view value = line.substr(2);
    switch (field) {
      case 'P': current.name = std::string(value); break;
      case 'V': current.version = std::string(value); break;
      case 'F': current_dir = "/" + std::string(value); break;
      case 'R':
        current.owned_files.push_back((current_dir.empty() ? "" : current_dir) + "/" +
                                      std::string(value));
        break;
      default: break;  // checksums, sizes, deps: not needed here
    }
    if (at_end) break;
  }
  flush();
  return packages;
}

}  // namespace strata
