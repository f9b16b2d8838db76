#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace strata {

enum class Errc {
  io_error,
  malformed_manifest,
  digest_mismatch,
  unsupported_media_type,
  truncated_stream,
  malformed_tar,
  path_escape,
  unsupported_db_format,
  auth_failed,
  manifest_not_found,
  platform_unavailable,
  usage,
};

std::string_view to_string(Errc code);

/// Fatal analysis error. Parsers that must stay total report warnings
/// instead of throwing; loading and network paths throw.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::io_error: return "io-error";
    case Errc::malformed_manifest: return "malformed-manifest";
    case Errc::digest_mismatch: return "digest-mismatch";
    case Errc::unsupported_media_type: return "unsupported-media-type";
    case Errc::truncated_stream: return "truncated-stream";
    case Errc::malformed_tar: return "malformed-tar";
    case Errc::path_escape: return "path-escape";
    case Errc::unsupported_db_format: return "unsupported-db-format";
    case Errc::auth_failed: return "auth-failed";
    case Errc::manifest_not_found: return "manifest-not-found";
    case Errc::platform_unavailable: return "platform-unavailable";
    case Errc::usage: return "usage";
  }
  return "unknown";
}

}  // namespace strata
