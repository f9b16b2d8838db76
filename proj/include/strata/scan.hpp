#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "strata/analyzers.hpp"
#include "strata/containerfile.hpp"
#include "strata/coverage.hpp"
#include "strata/detect.hpp"
#include "strata/image.hpp"
#include "strata/layer_history.hpp"

namespace strata {

struct ScanOptions {
  Platform platform;
  unsigned jobs = 0;
  std::optional<std::filesystem::path> patterns_file;  // extends the default table
};

/// Everything one pass over an image produces; commands pick the pieces
/// they need.
struct ScanResult {
  LoadedImage image;
  FileHistory history;
  SquashedView squashed;
  std::vector<ReconstructedInstruction> instructions;  // interpolated
  std::vector<std::string> unresolved_variables;
  std::vector<ExternalPackageRef> external_refs;
  AnalysisResult analysis;
  ObscurationReport report;
  CoverageReport coverage;
};

/// load -> history -> reconstruct -> analyze -> detect -> coverage.
ScanResult run_scan(const ImageSource& source, const ScanOptions& options = {});

/// RFC3339 UTC timestamp: the override when given, else the current time.
std::string resolve_clock(const std::optional<std::string>& override_value);

}  // namespace strata
