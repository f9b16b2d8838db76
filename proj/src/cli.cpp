#include "strata/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "strata/error.hpp"
#include "strata/io.hpp"
#include "strata/registry.hpp"
#include "strata/sbom.hpp"
#include "strata/scan.hpp"

namespace strata {

namespace {

struct CommonArgs {
  std::string input;
  std::string output = "-";
  std::string format;
  std::string platform = "linux/amd64";
  std::string patterns;
  std::string clock;
  unsigned jobs = 0;
  bool plain_http = false;
};

void add_common(CLI::App* cmd, CommonArgs* args, const std::string& default_format,
                const std::vector<std::string>& formats) {
  cmd->add_option("input", args->input,
                  "image: OCI layout dir, docker-save tar, or registry reference")
      ->required();
  cmd->add_option("-o,--output", args->output, "output path, - for stdout")
      ->capture_default_str();
  args->format = default_format;
  cmd->add_option("--format", args->format, "output format")
      ->check(CLI::IsMember(formats))
      ->capture_default_str();
  cmd->add_option("--platform", args->platform, "platform for multi-platform images")
      ->capture_default_str();
  cmd->add_option("--patterns", args->patterns,
                  "pattern table extension file (TACTIC ecosystem pattern per line)");
  cmd->add_option("--jobs", args->jobs, "parallel decompression/download bound (0 = auto)");
  cmd->add_option("--clock", args->clock, "RFC3339 timestamp override for reproducible output");
  cmd->add_flag("--plain-http", args->plain_http, "use HTTP for the registry (test registries)");
}

Platform parse_platform(const std::string& text) {
  size_t slash = text.find('/');
  if (slash == std::string::npos || slash == 0 || slash + 1 >= text.size()) {
    throw Error(Errc::usage, "platform must be os/arch, got: " + text);
  }
  return Platform{text.substr(0, slash), text.substr(slash + 1)};
}

void write_output(const std::string& output, std::string_view content) {
  if (output == "-") {
    std::cout << content;
    std::cout.flush();
    return;
  }
  write_file(output, content);
}

// registry references are materialized to a local layout first so all
// commands consume one input shape
ImageSource resolve_input(const CommonArgs& args, std::optional<TempDir>* scratch) {
  ImageSource source = classify_source(args.input);
  if (source.kind != SourceKind::registry_reference) return source;

  auto ref = registry::ImageReference::parse(args.input);
  std::cerr << "pulling " << ref.display() << "\n";
  scratch->emplace("strata-pull");
  registry::PullOptions options;
  options.platform = parse_platform(args.platform);
  if (args.jobs > 0) options.concurrency = args.jobs;
  options.plain_http = args.plain_http;
  ImageSource pulled = registry::pull(ref, (*scratch)->path(), options);
  pulled.locator = (*scratch)->path().string();
  return pulled;
}

ScanResult scan_input(const CommonArgs& args, std::optional<TempDir>* scratch) {
  ScanOptions options;
  options.platform = parse_platform(args.platform);
  options.jobs = args.jobs;
  if (!args.patterns.empty()) options.patterns_file = args.patterns;
  return run_scan(resolve_input(args, scratch), options);
}

int cmd_scan(const CommonArgs& args, const std::string& dump_containerfile) {
  std::optional<TempDir> scratch;
  ScanResult result = scan_input(args, &scratch);

  if (!dump_containerfile.empty()) {
    std::string text = render_containerfile(result.instructions);
    if (dump_containerfile == "-") std::cerr << text;
    else write_file(dump_containerfile, text);
  }

  SbomInfo info;
  info.image_name = args.input;
  info.image_digest = result.image.manifest_digest.empty() ? result.image.image_id
                                                           : result.image.manifest_digest;
  info.created = resolve_clock(args.clock.empty() ? std::nullopt
                                                  : std::make_optional(args.clock));
  info.os = result.analysis.os;
  std::string document = emit_spdx(result.analysis.packages, result.external_refs, info);
  write_output(args.output, document);

  for (const AnalyzerWarning& w : result.analysis.warnings) {
    std::cerr << "warning: [" << w.source << "] " << w.message << "\n";
  }
  std::cerr << "packages: " << result.analysis.packages.size() + result.external_refs.size()
            << " (" << result.external_refs.size() << " external)\n";
  std::cerr << coverage_summary(result.coverage) << "\n";
  return 0;
}

int cmd_detect(const CommonArgs& args) {
  std::optional<TempDir> scratch;
  ScanResult result = scan_input(args, &scratch);

  if (args.format == "table") {
    write_output(args.output, render_report_table(result.report));
  } else {
    write_output(args.output, report_to_json(result.report));
    std::cerr << render_report_table(result.report);
  }
  return result.report.is_obscure ? 3 : 0;
}

int cmd_coverage(const CommonArgs& args) {
  std::optional<TempDir> scratch;
  ScanResult result = scan_input(args, &scratch);

  if (args.format == "table") {
    write_output(args.output, coverage_summary(result.coverage) + "\n");
  } else {
    write_output(args.output, coverage_to_json(result.coverage));
  }
  std::cerr << coverage_summary(result.coverage) << "\n";
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"container image composition analysis resilient to obscured packages"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolName) + " " + std::string(kToolVersion));

  CommonArgs scan_args;
  std::string dump_containerfile;
  CLI::App* scan_cmd =
      app.add_subcommand("scan", "produce an SPDX SBOM plus coverage summary");
  add_common(scan_cmd, &scan_args, "spdx-json", {"spdx-json"});
  scan_cmd->add_option("--dump-containerfile", dump_containerfile,
                       "write the reconstructed Containerfile (path or -)");

  CommonArgs detect_args;
  CLI::App* detect_cmd =
      app.add_subcommand("detect", "report obscuration findings (exit 3 when obscure)");
  add_common(detect_cmd, &detect_args, "report-json", {"report-json", "table"});

  CommonArgs coverage_args;
  CLI::App* coverage_cmd = app.add_subcommand("coverage", "report the file-coverage metric");
  add_common(coverage_cmd, &coverage_args, "report-json", {"report-json", "table"});

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForVersion& e) {
    std::cout << app.version() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (scan_cmd->parsed()) return cmd_scan(scan_args, dump_containerfile);
    if (detect_cmd->parsed()) return cmd_detect(detect_args);
    if (coverage_cmd->parsed()) return cmd_coverage(coverage_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::usage ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace strata
