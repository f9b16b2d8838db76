#include <algorithm>
#include <map>

#include "strata/analyzers.hpp"
#include "strata/paths.hpp"

namespace strata {

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_file_like(const FileEntry& entry) {
  return entry.kind == FileKind::regular || entry.kind == FileKind::hardlink ||
         entry.kind == FileKind::symlink;
}

void merge_into(std::vector<Package>* dst, std::vector<Package>&& src) {
  dst->insert(dst->end(), std::make_move_iterator(src.begin()),
              std::make_move_iterator(src.end()));
}

void sort_unique(std::vector<std::string>* v) {
  std::sort(v->begin(), v->end());
  v->erase(std::unique(v->begin(), v->end()), v->end());
}

// Same (ecosystem, name, version) tuples collapse; installed provenance
// wins and file lists merge.
std::vector<Package> dedupe(std::vector<Package>&& raw) {
  std::map<std::string, Package> merged;
  for (Package& pkg : raw) {
    std::string key = pkg.key();
    auto [it, inserted] = merged.try_emplace(std::move(key), std::move(pkg));
    if (inserted) continue;
    Package& kept = it->second;
    if (pkg.provenance == Provenance::installed) kept.provenance = Provenance::installed;
    kept.metadata_files.insert(kept.metadata_files.end(), pkg.metadata_files.begin(),
                               pkg.metadata_files.end());
    kept.owned_files.insert(kept.owned_files.end(), pkg.owned_files.begin(),
                            pkg.owned_files.end());
    kept.degraded = kept.degraded && pkg.degraded;
  }
  std::vector<Package> out;
  out.reserve(merged.size());
  for (auto& [key, pkg] : merged) {
    sort_unique(&pkg.metadata_files);
    sort_unique(&pkg.owned_files);
    out.push_back(std::move(pkg));
  }
  return out;
}

}  // namespace

ViewAnalysis analyze_view(const SquashedView& view, const LayerStore& store, GoScanCache* cache) {
  ViewAnalysis result;
  std::vector<Package> found;

  result.os = detect_os(view, store);
  if (result.os) result.analyzed_files.insert(result.os->source_path);

  for (const auto& [path, entry] : view.files) {
    if (entry.kind != FileKind::regular && entry.kind != FileKind::hardlink) continue;

    if (ends_with(path, "/dpkg/status") || path.find("/dpkg/status.d/") != std::string::npos) {
      merge_into(&found, parse_dpkg_status(store.read(entry), view, store, &result.warnings, path));
    } else if (ends_with(path, "/apk/db/installed")) {
      auto packages = parse_apk_installed(store.read(entry), &result.warnings);
      for (Package& pkg : packages) {
        pkg.metadata_files.assign(1, path);
      }
      merge_into(&found, std::move(packages));
    } else if (ends_with(path, "/apk/world")) {
      // declared-only world entries
      std::string_view content = store.read(entry);
      size_t pos = 0;
      while (pos < content.size()) {
        size_t eol = content.find('\n', pos);
        if (eol == std::string_view::npos) eol = content.size();
        std::string_view name = content.substr(pos, eol - pos);
        pos = eol + 1;
        while (!name.empty() && (name.back() == '\r' || name.back() == ' ')) name.remove_suffix(1);
        if (name.empty()) continue;
        // constraint suffixes like "pkg>1.2" or "pkg=1.2-r0"
        size_t op = name.find_first_of("<>=~");
        Package pkg;
        pkg.ecosystem = Ecosystem::apk;
        pkg.provenance = Provenance::declared;
        pkg.name = std::string(op == std::string_view::npos ? name : name.substr(0, op));
        pkg.metadata_files.push_back(path);
        found.push_back(std::move(pkg));
      }
    } else if (basename_of(path) == "rpmdb.sqlite" || ends_with(path, "/rpm/Packages")) {
      std::string_view bytes = store.read(entry);
      auto packages = parse_rpm_db(
          std::as_bytes(std::span<const char>(bytes.data(), bytes.size())), &result.warnings);
      for (Package& pkg : packages) pkg.metadata_files.assign(1, path);
      merge_into(&found, std::move(packages));
    }
  }

  merge_into(&found, parse_python(view, store, &result.warnings));
  merge_into(&found, parse_node(view, store, &result.warnings));
  merge_into(&found, parse_ruby_php(view, store, &result.warnings));

  std::vector<Package> go_packages = parse_go(view, store, cache, &result.warnings);
  for (const Package& pkg : go_packages) {
    if (pkg.provenance == Provenance::installed) {
      for (const std::string& file : pkg.owned_files) result.analyzed_files.insert(file);
    }
  }
  merge_into(&found, std::move(go_packages));

  // drop directories from owned-file lists; directories are filesystem
  // structure, not attributable content
  for (Package& pkg : found) {
    std::erase_if(pkg.owned_files, [&view](const std::string& file) {
      const FileEntry* e = view.find(file);
      return e != nullptr && e->kind == FileKind::directory;
    });
  }

  result.packages = dedupe(std::move(found));
  return result;
}

AnalysisResult analyze_layers(const LoadedImage& image, const FileHistory& history) {
  AnalysisResult result;
  LayerStore store(image);
  GoScanCache cache;

  std::map<std::string, Package> merged;  // key -> package, earliest layer
  std::set<std::string> final_keys;
  std::set<std::pair<std::string, std::string>> seen_warnings;

  const size_t layer_count = image.layers.size();
  for (size_t k = 0; k < layer_count; ++k) {
    SquashedView view = squash_prefix(history, k + 1);
    ViewAnalysis va = analyze_view(view, store, &cache);

    LayerReport report;
    report.layer_index = k;
    for (const auto& [path, entry] : view.files) {
      if (is_file_like(entry)) ++report.files_present;
    }
    report.packages_seen = va.packages.size();

    std::set<std::string> attributed = va.analyzed_files;
    for (Package& pkg : va.packages) {
      const std::string key = pkg.key();
      for (const std::string& f : pkg.metadata_files) attributed.insert(f);
      for (const std::string& f : pkg.owned_files) attributed.insert(f);

      auto it = merged.find(key);
      if (it == merged.end()) {
        pkg.source_layer = k;
        report.new_package_keys.push_back(key);
        merged.emplace(key, std::move(pkg));
      } else {
        Package& kept = it->second;
        if (pkg.provenance == Provenance::installed) kept.provenance = Provenance::installed;
        kept.metadata_files.insert(kept.metadata_files.end(), pkg.metadata_files.begin(),
                                   pkg.metadata_files.end());
        kept.owned_files.insert(kept.owned_files.end(), pkg.owned_files.begin(),
                                pkg.owned_files.end());
        sort_unique(&kept.metadata_files);
        sort_unique(&kept.owned_files);
      }
    }
    for (const std::string& f : attributed) {
      if (const FileEntry* e = view.find(f); e != nullptr && is_file_like(*e)) {
        ++report.files_analyzed;
      }
    }
    result.layer_reports.push_back(std::move(report));

    for (const AnalyzerWarning& w : va.warnings) {
      if (seen_warnings.insert({w.source, w.message}).second) result.warnings.push_back(w);
    }
    if (va.os) result.os = va.os;  // the OS stays known even if later deleted

    if (k + 1 == layer_count) {
      for (const Package& pkg : va.packages) final_keys.insert(pkg.key());
      result.analyzed_files = std::move(va.analyzed_files);
    }
  }

  for (auto& [key, pkg] : merged) {
    pkg.obscured = final_keys.find(key) == final_keys.end();
    result.packages.push_back(std::move(pkg));
  }
  return result;
}

}  // namespace strata
