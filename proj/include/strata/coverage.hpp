#pragma once

#include <set>
#include <string>
#include <vector>

#include "strata/layer_history.hpp"
#include "strata/packages.hpp"

namespace strata {

/// File-coverage metric: how much of the filesystem is attributable to
/// identified packages or analyzed metadata. Directories and whiteout
/// mechanics never count; regular files, hardlinks, and symlinks do.
struct CoverageReport {
  size_t total_files = 0;
  size_t analyzed_files = 0;
  double coverage = 0.0;  // analyzed/total, 0 when total == 0
  bool empty_image = false;

  struct LayerCoverage {
    size_t layer_index = 0;
    size_t total_files = 0;
    size_t analyzed_files = 0;
    double coverage = 0.0;
  };
  std::vector<LayerCoverage> per_layer;  // grouped by the layer a file's final content came from

  std::vector<std::string> unattributed_sample;  // first N unmatched paths
};

CoverageReport compute_coverage(const SquashedView& squashed,
                                const std::vector<Package>& packages,
                                const std::set<std::string>& extra_analyzed,
                                size_t sample_limit = 20);

std::string coverage_to_json(const CoverageReport& report, int indent = 2);

/// One-line summary for CI logs.
std::string coverage_summary(const CoverageReport& report);

}  // namespace strata
