#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "strata/compress.hpp"
#include "strata/image.hpp"
#include "strata/layer_history.hpp"

namespace strata::test {

/// Minimal ustar writer for building layer fixtures. Long paths get a GNU
/// 'L' extension entry.
class TarWriter {
 public:
  TarWriter& file(std::string path, std::string_view content, uint32_t mode = 0644);
  TarWriter& dir(std::string path, uint32_t mode = 0755);
  TarWriter& symlink(std::string path, std::string target);
  TarWriter& hardlink(std::string path, std::string target);
  TarWriter& whiteout(std::string target_path);       // "/etc/x" -> etc/.wh.x
  TarWriter& opaque(std::string dir_path);            // "/app" -> app/.wh..wh..opq
  std::string finish() const;                          // adds the two end blocks

 private:
  void header(const std::string& path, char typeflag, uint64_t size, uint32_t mode,
              const std::string& link);
  std::string buf_;
};

std::string gzip_compress(std::string_view data);

/// A syntactically valid zstd frame built only from raw (uncompressed)
/// blocks, per the frame format spec. Serves as the independent encoder
/// for zstd fixtures.
std::string zstd_raw_frame(std::string_view data);

struct LayerFixture {
  std::string tar;
  std::string created_by;
  Compression codec = Compression::none;
};

/// Builds OCI layouts / docker-save tars out of layer fixtures.
class ImageBuilder {
 public:
  ImageBuilder& layer(std::string tar, std::string created_by,
                      Compression codec = Compression::gzip);
  /// History entry with empty_layer=true (ENV, CMD, ...).
  ImageBuilder& metadata_instruction(std::string created_by);
  ImageBuilder& env(std::string key_value);
  /// Replaces the whole history (e.g. none at all) regardless of layers.
  ImageBuilder& strip_history();

  /// Writes an OCI image layout; returns the layout directory.
  std::filesystem::path write_oci(const std::filesystem::path& dir) const;
  /// Writes a classic docker-save tar; returns the tar path.
  std::filesystem::path write_docker_save(const std::filesystem::path& tar_path) const;

  std::string config_json() const;

 private:
  struct HistoryItem {
    std::string created_by;
    bool empty_layer = false;
  };
  std::vector<LayerFixture> layers_;
  std::vector<HistoryItem> history_;
  std::vector<std::string> env_;
  bool strip_history_ = false;
};

/// Independent replay oracle: applies layer entries onto a plain path map
/// with runtime whiteout semantics. Deliberately shares no code with
/// build_history/squash.
std::set<std::string> replay_alive_paths(const std::vector<LayerDelta>& deltas);

/// Random layer-sequence generator for the whiteout equivalence property.
/// Never emits a whiteout for a path added in the same layer (the one
/// genuinely ambiguous case across runtimes).
std::vector<std::string> random_layer_tars(std::mt19937& rng, size_t max_layers = 5,
                                           size_t max_files = 30);

/// Extracts deltas from raw tar bytes.
std::vector<LayerDelta> deltas_from_tars(const std::vector<std::string>& tars);

/// In-memory view/store pair for analyzer tests: builds a single-layer
/// image world from one tar.
struct MemoryWorld {
  explicit MemoryWorld(const std::string& tar_bytes);
  MemoryWorld(const MemoryWorld&) = delete;

  LoadedImage image;  // single synthetic layer backed by a temp file
  FileHistory history;
  SquashedView view;
  LayerStore store;
};

}  // namespace strata::test
