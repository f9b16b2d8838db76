#include "strata/scan.hpp"

#include <ctime>
#include <future>

#include "strata/error.hpp"

namespace strata {

ScanResult run_scan(const ImageSource& source, const ScanOptions& options) {
  ScanResult result{.image = load_image(source, options.platform, options.jobs),
                    .history = {},
                    .squashed = {},
                    .instructions = {},
                    .unresolved_variables = {},
                    .external_refs = {},
                    .analysis = {},
                    .report = {},
                    .coverage = {}};
  const LoadedImage& image = result.image;

  std::vector<LayerDelta> deltas(image.layers.size());
  {
    std::vector<std::future<LayerDelta>> jobs;
    jobs.reserve(image.layers.size());
    for (const LayerArchive& layer : image.layers) {
      jobs.push_back(std::async(std::launch::async,
                                [&layer]() { return extract_entries(layer); }));
    }
    for (size_t i = 0; i < jobs.size(); ++i) deltas[i] = jobs[i].get();
  }
  result.history = build_history(deltas);
  result.squashed = squash(result.history);

  EnvContext env;
  for (const std::string& kv : image.config.env) {
    size_t eq = kv.find('=');
    if (eq != std::string::npos && eq > 0) env.assign(kv.substr(0, eq), kv.substr(eq + 1));
  }
  result.instructions = interpolate_all(reconstruct(image.config), env);
  result.unresolved_variables = env.unresolved;
  result.external_refs = extract_external_packages(result.instructions);

  result.analysis = analyze_layers(image, result.history);

  PatternTable table = PatternTable::defaults();
  if (options.patterns_file) table.extend_from_file(*options.patterns_file);
  result.report = detect(result.history, result.squashed, result.instructions,
                         result.external_refs, table, image.reference, image.layers.size());
  classify_false_positive_candidates(&result.report, result.analysis.packages);

  result.coverage = compute_coverage(result.squashed, result.analysis.packages,
                                     result.analysis.analyzed_files);
  return result;
}

std::string resolve_clock(const std::optional<std::string>& override_value) {
  std::time_t now = std::time(nullptr);
  if (override_value && !override_value->empty()) return *override_value;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch != nullptr && *epoch != '\0') {
    now = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  }
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

}  // namespace strata
