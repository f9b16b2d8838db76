#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "strata/image.hpp"

namespace strata {
namespace registry {

/// Parsed image reference with the usual defaults applied explicitly
/// (docker.io host, library/ namespace, latest tag).
struct ImageReference {
  std::string host;        // registry host[:port]
  std::string repository;  // e.g. "library/python"
  std::string tag = "latest";
  std::string digest;      // sha256 hex when pinned with @sha256:...

  static ImageReference parse(std::string_view reference);

  std::string manifest_reference() const {
    return digest.empty() ? tag : "sha256:" + digest;
  }
  std::string display() const;
};

struct PullOptions {
  Platform platform;
  unsigned concurrency = 4;   // parallel blob downloads
  bool plain_http = false;    // test registries
  std::string username;
  std::string password;
};

/// Fetches manifest, config, and layers over the distribution HTTP API,
/// verifying every blob, and materializes an OCI layout under `dest`.
/// Bearer-token challenges are negotiated automatically; blobs already
/// present in the layout are not re-fetched. The layout's index.json is
/// written only after every blob verified, so a failed pull leaves no
/// usable partial layout behind.
ImageSource pull(const ImageReference& ref, const std::filesystem::path& dest,
                 const PullOptions& options = {});

}  // namespace registry
}  // namespace strata
