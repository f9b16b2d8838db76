#include <algorithm>
#include <map>

#include <nlohmann/json.hpp>

#include "strata/analyzers.hpp"
#include "strata/paths.hpp"

namespace strata {

namespace {

using nlohmann::json;

// Deepest node_modules package directory containing `path`:
// .../node_modules/<name> or .../node_modules/@scope/<name>.
std::optional<std::string> package_dir_of(std::string_view path) {
  size_t at = path.rfind("/node_modules/");
  if (at == std::string_view::npos) return std::nullopt;
  size_t name_begin = at + 14;
  if (name_begin >= path.size()) return std::nullopt;
  size_t name_end = path.find('/', name_begin);
  std::string_view first =
      path.substr(name_begin, (name_end == std::string_view::npos ? path.size() : name_end) -
                                  name_begin);
  if (first.empty() || first == ".bin") return std::nullopt;
  if (first.front() == '@') {
    if (name_end == std::string_view::npos) return std::nullopt;
    size_t second_end = path.find('/', name_end + 1);
    size_t stop = second_end == std::string_view::npos ? path.size() : second_end;
    if (stop <= name_end + 1) return std::nullopt;
    return std::string(path.substr(0, stop));
  }
  return std::string(path.substr(0, name_end == std::string_view::npos ? path.size() : name_end));
}

// "/a/node_modules/@s/x" -> "@s/x"
std::string package_name_from_dir(std::string_view dir) {
  size_t at = dir.rfind("/node_modules/");
  return std::string(dir.substr(at + 14));
}

json parse_json_lenient(std::string_view text) {
  return json::parse(text, nullptr, false);
}

}  // namespace

std::vector<Package> parse_node(const SquashedView& view, const LayerStore& store,
                                std::vector<AnalyzerWarning>* warnings) {
  std::vector<Package> packages;

  auto read_text = [&](const std::string& path) -> std::optional<std::string> {
    const FileEntry* e = view.find(path);
    if (e == nullptr || (e->kind != FileKind::regular && e->kind != FileKind::hardlink)) {
      return std::nullopt;
    }
    return std::string(store.read(*e));
  };

  // installed packages under node_modules; every file belongs to the
  // deepest enclosing package
  std::map<std::string, std::vector<std::string>> owned_by_dir;
  for (const auto& [path, entry] : view.files) {
    auto dir = package_dir_of(path);
    if (!dir) continue;
    if (entry.kind == FileKind::directory) {
      owned_by_dir.try_emplace(*dir);  // make empty dirs visible
      continue;
    }
    owned_by_dir[*dir].push_back(path);
  }

  for (auto& [dir, owned] : owned_by_dir) {
    Package pkg;
    pkg.ecosystem = Ecosystem::npm;
    std::string manifest_path = dir + "/package.json";
    if (auto manifest = read_text(manifest_path)) {
      json j = parse_json_lenient(*manifest);
      if (!j.is_discarded() && j.is_object()) {
        pkg.name = j.value("name", "");
        std::string version = j.value("version", "");
        if (!version.empty()) pkg.version = version;
        pkg.metadata_files.push_back(manifest_path);
      }
    }
    if (pkg.name.empty()) {
      pkg.name = package_name_from_dir(dir);
      pkg.degraded = true;
      if (warnings != nullptr) {
        warnings->push_back({"node", "package.json unreadable, inferred " + pkg.name +
                                         " from directory " + dir});
      }
    }
    pkg.owned_files = std::move(owned);
    std::sort(pkg.owned_files.begin(), pkg.owned_files.end());
    packages.push_back(std::move(pkg));
  }

  // declared dependencies from project manifests and lockfiles
  for (const auto& [path, entry] : view.files) {
    if (path.find("/node_modules/") != std::string::npos) continue;
    if (entry.kind != FileKind::regular && entry.kind != FileKind::hardlink) continue;
    std::string_view base = basename_of(path);

    if (base == "package-lock.json") {
      json j = parse_json_lenient(store.read(entry));
      if (j.is_discarded() || !j.is_object()) {
        if (warnings != nullptr) warnings->push_back({"node", "malformed lockfile " + path});
        continue;
      }
      auto add = [&](const std::string& name, const json& info) {
        if (name.empty() || !info.is_object()) return;
        Package pkg;
        pkg.ecosystem = Ecosystem::npm;
        pkg.provenance = Provenance::declared;
        pkg.name = name;
        std::string version = info.value("version", "");
        if (!version.empty()) pkg.version = version;
        pkg.metadata_files.push_back(path);
        packages.push_back(std::move(pkg));
      };
      if (j.contains("packages") && j.at("packages").is_object()) {  // v2/v3
        for (const auto& [key, info] : j.at("packages").items()) {
          if (key.empty()) continue;  // the root project
          auto dir = package_dir_of("/" + key);
          add(dir ? package_name_from_dir(*dir) : key, info);
        }
      } else if (j.contains("dependencies") && j.at("dependencies").is_object()) {  // v1
        for (const auto& [name, info] : j.at("dependencies").items()) add(name, info);
      }
    } else if (base == "yarn.lock") {
      // classic yarn format: `name@range[, ...]:` then `  version "x"`
      std::string content(store.read(entry));
      std::string pending_name;
      size_t pos = 0;
      while (pos < content.size()) {
        size_t eol = content.find('\n', pos);
        if (eol == std::string::npos) eol = content.size();
        std::string_view line = std::string_view(content).substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty() || line.front() == '#') continue;
        if (line.front() != ' ' && line.back() == ':') {
          std::string_view head = line.substr(0, line.size() - 1);
          size_t comma = head.find(',');
          if (comma != std::string_view::npos) head = head.substr(0, comma);
          if (head.size() >= 2 && head.front() == '"' && head.back() == '"') {
            head = head.substr(1, head.size() - 2);
          }
          size_t at = head.rfind('@');
          pending_name = std::string(at == std::string_view::npos || at == 0
                                         ? head
                                         : head.substr(0, at));
          continue;
        }
        std::string_view t = line;
        while (!t.empty() && t.front() == ' ') t.remove_prefix(1);
        if (!pending_name.empty() && t.rfind("version ", 0) == 0) {
          std::string_view v = t.substr(8);
          if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
          Package pkg;
          pkg.ecosystem = Ecosystem::npm;
          pkg.provenance = Provenance::declared;
          pkg.name = pending_name;
          if (!v.empty()) pkg.version = std::string(v);
          pkg.metadata_files.push_back(path);
          packages.push_back(std::move(pkg));
          pending_name.clear();
        }
      }
    } else if (base == "package.json") {
      // prefer lockfile versions when a sibling lockfile exists
      std::string lock_sibling = std::string(parent_of(path)) + "/package-lock.json";
      if (lock_sibling.find("//") == 0) lock_sibling = lock_sibling.substr(1);
      if (view.find(lock_sibling) != nullptr) continue;
      json j = parse_json_lenient(store.read(entry));
      if (j.is_discarded() || !j.is_object()) continue;
      for (const char* section : {"dependencies", "devDependencies"}) {
        if (!j.contains(section) || !j.at(section).is_object()) continue;
        for (const auto& [name, range] : j.at(section).items()) {
          Package pkg;
          pkg.ecosystem = Ecosystem::npm;
          pkg.provenance = Provenance::declared;
          pkg.name = name;
          if (range.is_string()) {
            std::string r = range.get<std::string>();
            // exact pins only; ranges stay version-less
            if (!r.empty() && (std::isdigit(static_cast<unsigned char>(r.front())) != 0)) {
              pkg.version = r;
            }
          }
          pkg.metadata_files.push_back(path);
          packages.push_back(std::move(pkg));
        }
      }
    }
  }

  return packages;
}

}  // namespace strata
