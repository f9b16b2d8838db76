#include "strata/coverage.hpp"

#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace strata {

namespace {

bool counts_as_file(const FileEntry& entry) {
  return entry.kind == FileKind::regular || entry.kind == FileKind::hardlink ||
         entry.kind == FileKind::symlink;
}

}  // namespace

CoverageReport compute_coverage(const SquashedView& squashed,
                                const std::vector<Package>& packages,
                                const std::set<std::string>& extra_analyzed,
                                size_t sample_limit) {
  std::set<std::string> attributed = extra_analyzed;
  for (const Package& pkg : packages) {
    attributed.insert(pkg.owned_files.begin(), pkg.owned_files.end());
    attributed.insert(pkg.metadata_files.begin(), pkg.metadata_files.end());
  }

  CoverageReport report;
  std::map<size_t, CoverageReport::LayerCoverage> per_layer;
  for (const auto& [path, entry] : squashed.files) {
    if (!counts_as_file(entry)) continue;
    ++report.total_files;
    CoverageReport::LayerCoverage& layer = per_layer[entry.layer_index];
    layer.layer_index = entry.layer_index;
    ++layer.total_files;
    if (attributed.count(path) > 0) {
      ++report.analyzed_files;
      ++layer.analyzed_files;
    } else if (report.unattributed_sample.size() < sample_limit) {
      report.unattributed_sample.push_back(path);
    }
  }

  report.empty_image = report.total_files == 0;
  report.coverage = report.empty_image
                        ? 0.0
                        : static_cast<double>(report.analyzed_files) /
                              static_cast<double>(report.total_files);
  for (auto& [index, layer] : per_layer) {
    layer.coverage = layer.total_files == 0
                         ? 0.0
                         : static_cast<double>(layer.analyzed_files) /
                               static_cast<double>(layer.total_files);
    report.per_layer.push_back(layer);
  }
  return report;
}

std::string coverage_to_json(const CoverageReport& report, int indent) {
  nlohmann::ordered_json doc;
  doc["schemaVersion"] = 1;
  doc["totalFiles"] = report.total_files;
  doc["analyzedFiles"] = report.analyzed_files;
  doc["coverage"] = report.coverage;
  if (report.empty_image) doc["emptyImage"] = true;
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const auto& layer : report.per_layer) {
    nlohmann::ordered_json item;
    item["layer"] = layer.layer_index;
    item["totalFiles"] = layer.total_files;
    item["analyzedFiles"] = layer.analyzed_files;
    item["coverage"] = layer.coverage;
    layers.push_back(std::move(item));
  }
  doc["perLayer"] = std::move(layers);
  doc["unattributedSample"] = report.unattributed_sample;
  return doc.dump(indent) + "\n";
}

std::string coverage_summary(const CoverageReport& report) {
  std::ostringstream out;
  out << "coverage " << report.analyzed_files << "/" << report.total_files << " files ("
      << static_cast<int>(report.coverage * 1000.0) / 10.0 << "%)";
  if (report.empty_image) out << " [empty image]";
  return out.str();
}

}  // namespace strata
