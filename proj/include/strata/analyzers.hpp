#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "strata/layer_history.hpp"
#include "strata/packages.hpp"

namespace strata {

/// Everything the analyzers saw in one filesystem view.
struct ViewAnalysis {
  std::optional<OsRelease> os;
  std::vector<Package> packages;
  std::set<std::string> analyzed_files;  // OS files + go binaries with buildinfo
  std::vector<AnalyzerWarning> warnings;
};

/// Per-layer analysis report: what the cumulative view up to this layer
/// contained and what could be attributed.
struct LayerReport {
  size_t layer_index = 0;
  size_t files_present = 0;   // regular files + links alive in the view
  size_t files_analyzed = 0;  // attributed to packages/metadata at this point
  size_t packages_seen = 0;
  std::vector<std::string> new_package_keys;  // first seen at this layer
};

/// Merged result of the layer-by-layer walk.
struct AnalysisResult {
  std::optional<OsRelease> os;
  std::vector<Package> packages;  // deduped; source_layer = first sighting
  std::vector<LayerReport> layer_reports;
  std::set<std::string> analyzed_files;
  std::vector<AnalyzerWarning> warnings;
};

/// Content-digest keyed cache so identical binaries are scanned once
/// across per-layer views.
struct GoScanCache {
  std::unordered_map<std::string, std::vector<Package>> by_digest;
};

// --- os -------------------------------------------------------------------

/// First match wins: /etc/os-release, /usr/lib/os-release, /etc/*-release,
/// /etc/debian_version. Absence is a signal, not an error.
std::optional<OsRelease> detect_os(const SquashedView& view, const LayerStore& store);

/// Parses ID= / VERSION_ID= lines of an os-release style file.
OsRelease parse_os_release(std::string_view content, std::string source_path);

// --- OS package managers ----------------------------------------------------

std::vector<Package> parse_dpkg_status(std::string_view content, const SquashedView& view,
                                       const LayerStore& store,
                                       std::vector<AnalyzerWarning>* warnings,
                                       const std::string& status_path = "/var/lib/dpkg/status");

std::vector<Package> parse_apk_installed(std::string_view content,
                                         std::vector<AnalyzerWarning>* warnings);

/// Decodes an rpmdb.sqlite Packages table of header blobs. BerkeleyDB
/// databases are reported as unsupported, never silently dropped.
std::vector<Package> parse_rpm_db(std::span<const std::byte> db_bytes,
                                  std::vector<AnalyzerWarning>* warnings);

/// Decodes one rpm header blob (the database "unloaded" form: no lead or
/// 8-byte magic preamble, starting at the index/data length words).
std::optional<Package> parse_rpm_header_blob(std::span<const std::byte> blob,
                                             std::vector<AnalyzerWarning>* warnings);

// --- language ecosystems ----------------------------------------------------

std::vector<Package> parse_python(const SquashedView& view, const LayerStore& store,
                                  std::vector<AnalyzerWarning>* warnings);

std::vector<Package> parse_node(const SquashedView& view, const LayerStore& store,
                                std::vector<AnalyzerWarning>* warnings);

std::vector<Package> parse_ruby_php(const SquashedView& view, const LayerStore& store,
                                    std::vector<AnalyzerWarning>* warnings);

std::vector<Package> parse_go(const SquashedView& view, const LayerStore& store,
                              GoScanCache* cache, std::vector<AnalyzerWarning>* warnings);

/// Decodes the go1.18+ inline build-info block out of raw binary content.
/// Returns packages (main module + deps) or empty when no magic is found;
/// pre-1.18 pointer-based info yields a warning.
std::vector<Package> scan_go_binary(std::string_view content, const std::string& path,
                                    std::vector<AnalyzerWarning>* warnings);

// --- orchestration ----------------------------------------------------------

/// Runs every analyzer against one filesystem view.
ViewAnalysis analyze_view(const SquashedView& view, const LayerStore& store,
                          GoScanCache* cache = nullptr);

/// The layer-by-layer walk: analyzers run against each layer's cumulative
/// view in order; packages keep the layer where they first appeared, and
/// packages no longer visible in the final view are marked obscured.
AnalysisResult analyze_layers(const LoadedImage& image, const FileHistory& history);

}  // namespace strata
