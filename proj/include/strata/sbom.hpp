#pragma once

#include <optional>
#include <string>
#include <vector>

#include "strata/containerfile.hpp"
#include "strata/packages.hpp"

namespace strata {

inline constexpr std::string_view kToolName = "strata";
inline constexpr std::string_view kToolVersion = "0.1.0";

struct SbomInfo {
  std::string image_name;    // document name
  std::string image_digest;  // drives the deterministic document namespace
  std::string created;       // RFC3339 UTC timestamp (injectable for reproducible output)
  std::optional<OsRelease> os;  // namespace source for deb/apk/rpm purls
};

/// Canonical package URL for a discovered package.
std::string make_purl(const Package& package, const std::optional<OsRelease>& os);

/// purl for an externally downloaded package (pkg:generic with the
/// download location attached).
std::string make_purl(const ExternalPackageRef& ref);

/// SPDX 2.3 JSON document over the consolidated package corpus. Emission
/// is byte-deterministic for a fixed SbomInfo.
std::string emit_spdx(std::vector<Package> packages, std::vector<ExternalPackageRef> refs,
                      const SbomInfo& info, int indent = 2);

}  // namespace strata
