#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

#include "strata/analyzers.hpp"
#include "strata/paths.hpp"

namespace strata {

namespace {

using nlohmann::json;

// "rake-13.0.6.gemspec" -> (rake, 13.0.6); platform suffixes stay part of
// the version ("rake-13.0.6-java" -> version "13.0.6-java").
std::optional<std::pair<std::string, std::string>> split_gemspec_name(std::string_view base) {
  if (base.size() <= 8 || base.substr(base.size() - 8) != ".gemspec") return std::nullopt;
  std::string_view stem = base.substr(0, base.size() - 8);

  size_t pos = 0;
  while (pos < stem.size()) {
    size_t dash = stem.find('-', pos);
    if (dash == std::string_view::npos || dash + 1 >= stem.size()) break;
    if (std::isdigit(static_cast<unsigned char>(stem[dash + 1]))) {
      return std::make_pair(std::string(stem.substr(0, dash)),
                            std::string(stem.substr(dash + 1)));
    }
    pos = dash + 1;
  }
  return std::make_pair(std::string(stem), std::string());
}

}  // namespace

std::vector<Package> parse_ruby_php(const SquashedView& view, const LayerStore& store,
                                    std::vector<AnalyzerWarning>* warnings) {
  std::vector<Package> packages;

  // --- gems: specifications/<name>-<version>.gemspec, no Ruby evaluation
  for (const auto& [path, entry] : view.files) {
    if (entry.kind == FileKind::directory) continue;
    std::string_view parent = parent_of(path);
    std::string_view parent_base = basename_of(parent);
    if (parent_base == "default") parent = parent_of(parent), parent_base = basename_of(parent);
    if (parent_base != "specifications") continue;
    auto split = split_gemspec_name(basename_of(path));
    if (!split) continue;

    Package pkg;
    pkg.ecosystem = Ecosystem::gem;
    pkg.name = split->first;
    if (!split->second.empty()) pkg.version = split->second;
    pkg.metadata_files.push_back(path);

    // content lives in ../gems/<name>-<version>/
    std::string gems_root = std::string(parent_of(parent));
    std::string content_dir = gems_root + "/gems/" + split->first +
                              (split->second.empty() ? "" : "-" + split->second);
    for (auto it = view.files.lower_bound(content_dir + "/"); it != view.files.end(); ++it) {
      if (!is_under(content_dir, it->first)) break;
      if (it->second.kind == FileKind::directory) continue;
      pkg.owned_files.push_back(it->first);
    }
    packages.push_back(std::move(pkg));
  }

  // --- composer
  for (const auto& [path, entry] : view.files) {
    if (entry.kind != FileKind::regular && entry.kind != FileKind::hardlink) continue;
    std::string_view base = basename_of(path);
    if (path.find("/vendor/") != std::string::npos) continue;  // package-internal copies

    if (base == "composer.lock") {
      json j = json::parse(store.read(entry), nullptr, false);
      if (j.is_discarded() || !j.is_object()) {
        if (warnings != nullptr) warnings->push_back({"composer", "malformed " + path});
        continue;
      }
      std::string vendor_root = std::string(parent_of(path)) + "/vendor";
      if (vendor_root.rfind("//", 0) == 0) vendor_root = vendor_root.substr(1);
      for (const char* section : {"packages", "packages-dev"}) {
        if (!j.contains(section) || !j.at(section).is_array()) continue;
        for (const auto& p : j.at(section)) {
          std::string name = p.value("name", "");
          if (name.empty()) continue;
          Package pkg;
          pkg.ecosystem = Ecosystem::composer;
          pkg.name = name;
          std::string version = p.value("version", "");
          if (!version.empty()) pkg.version = version;
          pkg.metadata_files.push_back(path);
          std::string content_dir = vendor_root + "/" + name;
          for (auto it = view.files.lower_bound(content_dir + "/"); it != view.files.end();
               ++it) {
            if (!is_under(content_dir, it->first)) break;
            if (it->second.kind == FileKind::directory) continue;
            pkg.owned_files.push_back(it->first);
          }
          packages.push_back(std::move(pkg));
        }
      }
    } else if (base == "composer.json") {
      json j = json::parse(store.read(entry), nullptr, false);
      if (j.is_discarded() || !j.is_object()) continue;
      // declared requirements; the lockfile, when present, carries the
      // installed truth and is parsed above
      if (!j.contains("require") || !j.at("require").is_object()) continue;
      for (const auto& [name, range] : j.at("require").items()) {
        if (name == "php" || name.rfind("ext-", 0) == 0 || name.find('/') == std::string::npos) {
          continue;
        }
        Package pkg;
        pkg.ecosystem = Ecosystem::composer;
        pkg.provenance = Provenance::declared;
        pkg.name = name;
        if (range.is_string()) {
          std::string r = range.get<std::string>();
          if (!r.empty() && std::isdigit(static_cast<unsigned char>(r.front())) != 0) {
            pkg.version = r;
          }
        }
        pkg.metadata_files.push_back(path);
        packages.push_back(std::move(pkg));
      }
    }
  }

  return packages;
}

}  // namespace strata
