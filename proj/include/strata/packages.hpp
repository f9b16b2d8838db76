#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace strata {

enum class Ecosystem { deb, apk, rpm, pypi, npm, gem, composer, golang, external };

std::string_view to_string(Ecosystem ecosystem);

/// Whether the package was found installed on the filesystem or only
/// declared in a dependency file.
enum class Provenance { installed, declared };

std::string_view to_string(Provenance provenance);

/// One discovered component and the files that belong to it.
struct Package {
  Ecosystem ecosystem = Ecosystem::external;
  std::string name;
  std::optional<std::string> version;
  size_t source_layer = 0;
  Provenance provenance = Provenance::installed;
  std::vector<std::string> metadata_files;
  std::vector<std::string> owned_files;
  bool obscured = false;
  bool degraded = false;  // metadata unreadable, identity inferred from paths

  /// Deduplication identity.
  std::string key() const {
    std::string k(to_string(ecosystem));
    k += '\x1f';
    k += name;
    k += '\x1f';
    k += version.value_or("");
    return k;
  }
};

struct OsRelease {
  std::string os_id;
  std::optional<std::string> version_id;
  std::string source_path;
};

struct AnalyzerWarning {
  std::string source;   // analyzer or file that produced it
  std::string message;
};

}  // namespace strata
