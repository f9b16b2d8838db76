#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "strata/image.hpp"

namespace strata {

enum class Verb {
  RUN, COPY, ADD, ENV, ARG, WORKDIR, ENTRYPOINT, CMD, LABEL, EXPOSE, USER, FROM,
  VOLUME, SHELL, HEALTHCHECK, STOPSIGNAL, MAINTAINER, ONBUILD, other,
};

std::string_view to_string(Verb verb);

struct ReconstructedInstruction {
  Verb verb = Verb::other;
  std::string args;                 // text after the verb, shell prefixes stripped
  std::string raw_text;             // the created_by string, untouched
  std::optional<size_t> layer_index;  // absent for empty-layer instructions
};

/// ENV/ARG assignments accumulated in instruction order; later assignments
/// shadow earlier ones.
struct EnvContext {
  std::map<std::string, std::string> values;
  std::vector<std::string> unresolved;  // variables referenced but never defined

  void assign(std::string name, std::string value) { values[std::move(name)] = std::move(value); }
};

enum class RefKind { git_repository, archive, binary, script };

std::string_view to_string(RefKind kind);

/// A package fetched from the network instead of a package manager.
struct ExternalPackageRef {
  std::string url;
  RefKind kind = RefKind::archive;
  std::string inferred_name;
  std::optional<std::string> inferred_version;
  std::optional<size_t> layer_index;
};

/// Parses config history back into ordered instructions. Unparseable
/// entries degrade to verb=other with the raw text preserved.
std::vector<ReconstructedInstruction> reconstruct(const ImageConfig& config);

/// Expands $VAR / ${VAR} against the context; undefined names stay verbatim
/// and are recorded in ctx.unresolved.
std::string interpolate(const ReconstructedInstruction& instr, EnvContext& ctx);

/// Seeds a context from the image ENV and walks all instructions through
/// interpolation, returning the expanded instruction texts in order.
std::vector<ReconstructedInstruction> interpolate_all(
    const std::vector<ReconstructedInstruction>& instrs, EnvContext& ctx);

/// Scans interpolated instructions for external package downloads: fetch
/// commands, VCS clones, ADD with a URL source, and language-tool installs
/// that point at URLs.
std::vector<ExternalPackageRef> extract_external_packages(
    const std::vector<ReconstructedInstruction>& interpolated);

/// Renders the reconstruction as Containerfile-style text for audit.
std::string render_containerfile(const std::vector<ReconstructedInstruction>& instrs);

/// Splits a shell command line on pipeline/chain operators (&&, ||, |, ;)
/// honoring single/double quotes.
std::vector<std::string> split_shell_commands(std::string_view command_line);

/// Splits one command into whitespace-separated tokens honoring quotes.
std::vector<std::string> shell_tokens(std::string_view command);

/// Infers (name, version) from the last path segment of a URL.
std::pair<std::string, std::optional<std::string>> infer_name_version(std::string_view url);

}  // namespace strata
