#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "strata/containerfile.hpp"
#include "strata/layer_history.hpp"
#include "strata/packages.hpp"

namespace strata {

enum class Tactic { OS, OSPKG, DEP, PKG, URL, COMPRESS, LINK, ALIAS };

std::string_view to_string(Tactic tactic);

enum class FindingStatus { missing, modified, deleted, detected };

std::string_view to_string(FindingStatus status);

enum class MatchKind { substring, basename_glob };

struct PatternRow {
  Tactic tactic = Tactic::PKG;
  std::string ecosystem;  // "any", "dpkg", "python", ...
  std::string pattern;
  MatchKind kind = MatchKind::substring;

  bool matches(std::string_view path, bool is_dir) const;
};

/// The path pattern table driving detection. The default table carries the
/// built-in rows; user extensions append to it, never replace it.
struct PatternTable {
  std::vector<PatternRow> rows;

  static PatternTable defaults();

  /// Appends rows from a plain-text file: "TACTIC ecosystem pattern" per
  /// line, '#' comments. Patterns containing '/' match as substrings,
  /// anything else as a basename glob.
  void extend_from_text(std::string_view text);
  void extend_from_file(const std::filesystem::path& path);
};

struct ObscurationFinding {
  Tactic tactic = Tactic::OS;
  FindingStatus status = FindingStatus::detected;
  std::optional<std::string> path;
  std::optional<size_t> layer_index;
  std::optional<std::string> ecosystem;
  std::string evidence;
  std::string annotation;  // set by the false-positive pass

  // digests around a Modified event, kept for the benign-update check
  std::optional<std::string> prior_digest;
  std::optional<std::string> new_digest;
};

struct ObscurationReport {
  std::string image;
  std::vector<ObscurationFinding> findings;  // ordered (tactic, layer, path)
  std::map<std::string, size_t> counts_by_tactic;
  bool is_obscure = false;
};

/// Applies the pattern table to the file history and the reconstructed
/// Containerfile. `layer_count` is the filesystem layer count of the image
/// (used by the history-loss heuristic).
ObscurationReport detect(const FileHistory& history, const SquashedView& squashed,
                         const std::vector<ReconstructedInstruction>& instrs,
                         const std::vector<ExternalPackageRef>& refs,
                         const PatternTable& table, std::string image_name,
                         size_t layer_count);

/// Annotates Modified findings that look like routine package updates;
/// findings are never removed ("conservative inclusion").
void classify_false_positive_candidates(ObscurationReport* report,
                                        const std::vector<Package>& packages);

/// JSON document for machine consumption (schemaVersion field included).
std::string report_to_json(const ObscurationReport& report, int indent = 2);

/// The human table; URL/LINK/ALIAS detections render under Missing.
std::string render_report_table(const ObscurationReport& report);

}  // namespace strata
