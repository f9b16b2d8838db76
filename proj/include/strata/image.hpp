#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "strata/compress.hpp"
#include "strata/io.hpp"

namespace strata {

enum class SourceKind { oci_layout_dir, docker_save_tar, registry_reference };

struct ImageSource {
  SourceKind kind = SourceKind::oci_layout_dir;
  std::string locator;
};

/// Picks the loader for a local path: a directory containing index.json is
/// an OCI layout, a file is a docker-save tar; anything else is treated as
/// a registry reference.
ImageSource classify_source(const std::string& locator);

struct Platform {
  std::string os = "linux";
  std::string arch = "amd64";
};

struct Descriptor {
  std::string media_type;
  std::string digest;  // sha256, lowercase hex
  uint64_t size = 0;
};

struct Manifest {
  int schema_version = 2;
  Descriptor config;
  std::vector<Descriptor> layers;
};

struct HistoryEntry {
  std::string created_by;
  bool empty_layer = false;
};

struct ImageConfig {
  std::string os;
  std::vector<std::string> env;  // KEY=VALUE
  std::vector<HistoryEntry> history;
  std::vector<std::string> diff_ids;  // sha256 hex of decompressed layers
};

/// One decompressed layer, spooled to disk for random access.
struct LayerArchive {
  size_t index = 0;
  std::string diff_id;
  std::filesystem::path tar_path;
  uint64_t size = 0;
};

/// The canonical unit all analysis consumes: verified manifest + config +
/// decompressed layers + the layer/history alignment. Immutable once built
/// and safe to share across threads.
struct LoadedImage {
  std::string reference;        // display name of the input
  std::string image_id;         // sha256 hex of the config blob
  std::string manifest_digest;  // sha256 hex of the manifest blob, when known
  Manifest manifest;
  ImageConfig config;
  std::vector<LayerArchive> layers;
  std::vector<size_t> layer_to_history;  // layer position -> history entry position

  std::shared_ptr<TempDir> scratch;  // owns the decompressed layer files
};

/// Maps the configured media type onto a codec; throws
/// Error(unsupported_media_type) for anything unrecognized (encrypted or
/// foreign layer types must fail loudly, not be skipped).
Compression compression_for_media_type(std::string_view media_type);

/// Decompresses one layer blob according to its declared media type.
void decompress_layer(std::span<const std::byte> blob, std::string_view media_type,
                      const ByteSink& sink);

/// Aligns filesystem layers with config history by skipping empty-layer
/// entries in order. Result[i] is the history index of layer i. Throws
/// Error(malformed_manifest) when the non-empty history count does not
/// equal `layer_count`.
std::vector<size_t> align_history(const ImageConfig& config, size_t layer_count);

/// Loads, digest-verifies, and decompresses an image from a local source.
/// `jobs` bounds concurrent layer decompression (0 = hardware default).
LoadedImage load_image(const ImageSource& source, const Platform& platform = {},
                       unsigned jobs = 0);

}  // namespace strata
