#include <algorithm>
#include <cctype>

#include "strata/analyzers.hpp"
#include "strata/paths.hpp"

namespace strata {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// "Name: Flask" / "Version: 2.3.2" out of METADATA / PKG-INFO
std::pair<std::string, std::string> parse_core_metadata(std::string_view content) {
  std::string name;
  std::string version;
  size_t pos = 0;
  while (pos < content.size()) {
    size_t eol = content.find('\n', pos);
    if (eol == std::string_view::npos) eol = content.size();
    std::string_view line = content.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) break;  // headers end at the first blank line
    if (line.rfind("Name:", 0) == 0) name = std::string(trim(line.substr(5)));
    else if (line.rfind("Version:", 0) == 0) version = std::string(trim(line.substr(8)));
    if (!name.empty() && !version.empty()) break;
  }
  return {name, version};
}

// "<name>-<version>.dist-info" -> {name, version}
std::pair<std::string, std::string> split_dist_dirname(std::string_view dirname,
                                                       std::string_view suffix) {
  if (dirname.size() > suffix.size() &&
      dirname.substr(dirname.size() - suffix.size()) == suffix) {
    dirname = dirname.substr(0, dirname.size() - suffix.size());
  }
  size_t dash = dirname.rfind('-');
  if (dash == std::string_view::npos || dash == 0) return {std::string(dirname), ""};
  return {std::string(dirname.substr(0, dash)), std::string(dirname.substr(dash + 1))};
}

// First CSV field of a RECORD line; installer-quoted when it holds commas.
std::string_view record_path_field(std::string_view line) {
  if (line.empty()) return line;
  if (line.front() == '"') {
    size_t close = line.find('"', 1);
    if (close != std::string_view::npos) return line.substr(1, close - 1);
  }
  size_t comma = line.find(',');
  return comma == std::string_view::npos ? line : line.substr(0, comma);
}

// Requirement line -> (name, exact version if pinned with ==)
std::optional<std::pair<std::string, std::string>> parse_requirement(std::string_view line) {
  line = trim(line);
  if (line.empty() || line.front() == '#' || line.front() == '-') return std::nullopt;
  size_t cut = line.find_first_of(" ;#");
  if (cut != std::string_view::npos) line = trim(line.substr(0, cut));
  if (line.find("://") != std::string_view::npos) return std::nullopt;  // URL requirement

  size_t op = line.find_first_of("=<>!~");
  std::string name;
  std::string version;
  if (op == std::string_view::npos) {
    name = std::string(line);
  } else {
    name = std::string(trim(line.substr(0, op)));
    std::string_view spec = line.substr(op);
    if (spec.rfind("==", 0) == 0) {
      version = std::string(trim(spec.substr(2)));
      // strip trailing extras of the style ".*"
      if (version.size() > 2 && version.substr(version.size() - 2) == ".*") {
        version.resize(version.size() - 2);
      }
    }
  }
  size_t bracket = name.find('[');
  if (bracket != std::string::npos) name.resize(bracket);
  if (name.empty()) return std::nullopt;
  return std::make_pair(name, version);
}

}  // namespace

std::vector<Package> parse_python(const SquashedView& view, const LayerStore& store,
                                  std::vector<AnalyzerWarning>* warnings) {
  std::vector<Package> packages;

  // installed distributions: <dir>.dist-info / <dir>.egg-info at any depth
  std::set<std::string> dist_dirs;
  std::vector<const FileEntry*> single_file_egg_infos;
  for (const auto& [path, entry] : view.files) {
    for (std::string_view suffix : {std::string_view(".dist-info"), std::string_view(".egg-info")}) {
      size_t at = path.find(std::string(suffix) + "/");
      if (at != std::string::npos) {
        dist_dirs.insert(path.substr(0, at + suffix.size()));
      } else if (path.size() > suffix.size() &&
                 path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0) {
        if (entry.kind == FileKind::directory) {
          dist_dirs.insert(path);
        } else if (suffix == ".egg-info" && entry.kind == FileKind::regular) {
          single_file_egg_infos.push_back(&entry);
        }
      }
    }
  }

  auto read_text = [&](const std::string& path) -> std::optional<std::string> {
    const FileEntry* e = view.find(path);
    if (e == nullptr || (e->kind != FileKind::regular && e->kind != FileKind::hardlink)) {
      return std::nullopt;
    }
    return std::string(store.read(*e));
  };

  for (const std::string& dir : dist_dirs) {
    const bool is_dist_info = dir.size() > 10 && dir.substr(dir.size() - 10) == ".dist-info";
    Package pkg;
    pkg.ecosystem = Ecosystem::pypi;

    std::optional<std::string> meta =
        is_dist_info ? read_text(dir + "/METADATA") : read_text(dir + "/PKG-INFO");
    if (meta) {
      auto [name, version] = parse_core_metadata(*meta);
      pkg.name = name;
      if (!version.empty()) pkg.version = version;
      pkg.metadata_files.push_back(is_dist_info ? dir + "/METADATA" : dir + "/PKG-INFO");
    }
    if (pkg.name.empty()) {
      auto [name, version] = split_dist_dirname(std::string_view(basename_of(dir)),
                                                is_dist_info ? ".dist-info" : ".egg-info");
      if (name.empty()) continue;
      pkg.name = name;
      if (!version.empty()) pkg.version = version;
      pkg.degraded = true;  // identity recovered from the path alone
      if (warnings != nullptr) {
        warnings->push_back({"python", "metadata unreadable, inferred " + pkg.name +
                                           " from directory " + dir});
      }
    }

    // every surviving file of the metadata directory is package metadata
    for (auto it = view.files.lower_bound(dir + "/"); it != view.files.end(); ++it) {
      if (!is_under(dir, it->first)) break;
      if (it->second.kind == FileKind::directory) continue;
      if (std::find(pkg.metadata_files.begin(), pkg.metadata_files.end(), it->first) ==
          pkg.metadata_files.end()) {
        pkg.metadata_files.push_back(it->first);
      }
    }

    if (auto record = read_text(dir + "/RECORD")) {
      std::string_view parent = parent_of(dir);
      size_t pos = 0;
      while (pos < record->size()) {
        size_t eol = record->find('\n', pos);
        if (eol == std::string::npos) eol = record->size();
        std::string_view line = trim(std::string_view(*record).substr(pos, eol - pos));
        pos = eol + 1;
        if (line.empty()) continue;
        std::string_view rel = record_path_field(line);
        if (rel.empty()) continue;
        std::string joined = std::string(parent) + "/" + std::string(rel);
        if (auto normalized = normalize_tar_path(joined)) {
          pkg.owned_files.push_back(*normalized);
        }
      }
    } else if (auto installed = read_text(dir + "/installed-files.txt")) {
      size_t pos = 0;
      while (pos < installed->size()) {
        size_t eol = installed->find('\n', pos);
        if (eol == std::string::npos) eol = installed->size();
        std::string_view line = trim(std::string_view(*installed).substr(pos, eol - pos));
        pos = eol + 1;
        if (line.empty()) continue;
        if (auto normalized = normalize_tar_path(std::string(dir).substr(1) + "/" +
                                                 std::string(line))) {
          pkg.owned_files.push_back(*normalized);
        }
      }
    }
    packages.push_back(std::move(pkg));
  }

  for (const FileEntry* entry : single_file_egg_infos) {
    std::string content(store.read(*entry));
    auto [name, version] = parse_core_metadata(content);
    Package pkg;
    pkg.ecosystem = Ecosystem::pypi;
    pkg.metadata_files.push_back(entry->path);
    if (name.empty()) {
      auto [n, v] = split_dist_dirname(basename_of(entry->path), ".egg-info");
      name = n;
      version = v;
      pkg.degraded = true;
    }
    if (name.empty()) continue;
    pkg.name = name;
    if (!version.empty()) pkg.version = version;
    packages.push_back(std::move(pkg));
  }

  // declared dependencies
  for (const auto& [path, entry] : view.files) {
    std::string_view base = basename_of(path);
    if (path.find(".dist-info/") != std::string::npos ||
        path.find(".egg-info/") != std::string::npos) {
      continue;  // files shipped inside an installed distribution
    }
    if (base == "requirements.txt") {
      if (entry.kind != FileKind::regular && entry.kind != FileKind::hardlink) continue;
      std::string content(store.read(entry));
      size_t pos = 0;
      while (pos < content.size()) {
        size_t eol = content.find('\n', pos);
        if (eol == std::string::npos) eol = content.size();
        std::string_view line = std::string_view(content).substr(pos, eol - pos);
        pos = eol + 1;
        if (auto req = parse_requirement(line)) {
          Package pkg;
          pkg.ecosystem = Ecosystem::pypi;
          pkg.provenance = Provenance::declared;
          pkg.name = req->first;
          if (!req->second.empty()) pkg.version = req->second;
          pkg.metadata_files.push_back(path);
          packages.push_back(std::move(pkg));
        }
      }
    } else if (base == "Pipfile") {
      if (entry.kind != FileKind::regular && entry.kind != FileKind::hardlink) continue;
      std::string content(store.read(entry));
      bool in_packages = false;
      size_t pos = 0;
      while (pos < content.size()) {
        size_t eol = content.find('\n', pos);
        if (eol == std::string::npos) eol = content.size();
        std::string_view line = trim(std::string_view(content).substr(pos, eol - pos));
        pos = eol + 1;
        if (line.empty() || line.front() == '#') continue;
        if (line.front() == '[') {
          in_packages = line == "[packages]" || line == "[dev-packages]";
          continue;
        }
        if (!in_packages) continue;
        size_t eq = line.find('=');
        if (eq == std::string_view::npos) continue;
        std::string name(trim(line.substr(0, eq)));
        if (name.size() >= 2 && name.front() == '"' && name.back() == '"') {
          name = name.substr(1, name.size() - 2);
        }
        if (name.empty()) continue;
        std::string_view spec = trim(line.substr(eq + 1));
        Package pkg;
        pkg.ecosystem = Ecosystem::pypi;
        pkg.provenance = Provenance::declared;
        pkg.name = name;
        size_t pin = spec.find("==");
        if (pin != std::string_view::npos) {
          std::string_view v = spec.substr(pin + 2);
          size_t end = v.find_first_of("\"'}, ");
          if (end != std::string_view::npos) v = v.substr(0, end);
          if (!v.empty()) pkg.version = std::string(v);
        }
        pkg.metadata_files.push_back(path);
        packages.push_back(std::move(pkg));
      }
    }
  }

  return packages;
}

}  // namespace strata
