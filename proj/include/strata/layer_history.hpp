#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "strata/image.hpp"
#include "strata/io.hpp"

namespace strata {

enum class FileKind {
  regular,
  directory,
  symlink,
  hardlink,
  whiteout,
  opaque_whiteout,
  other,
};

std::string_view to_string(FileKind kind);

struct FileEntry {
  std::string path;  // normalized absolute
  FileKind kind = FileKind::regular;
  uint64_t size = 0;
  uint32_t mode = 0;
  std::string link_target;  // verbatim, for symlink/hardlink
  std::optional<std::string> content_digest;  // sha256 hex, regular/hardlink

  // Content location, for on-demand reads through LayerStore.
  size_t layer_index = 0;
  uint64_t data_offset = 0;
};

/// The typed change-set of one layer, in archive order.
struct LayerDelta {
  size_t layer_index = 0;
  std::vector<FileEntry> entries;
};

enum class FileAction { added, modified, deleted };

std::string_view to_string(FileAction action);

struct FileEvent {
  size_t layer_index = 0;
  FileAction action = FileAction::added;
  FileEntry entry;  // for deletions: the entry that was removed
  std::optional<std::string> prior_digest;  // modified events keep both digests
};

/// Per-path modification history across ordered layers.
struct FileHistory {
  std::map<std::string, std::vector<FileEvent>> paths;
  /// Whiteouts that targeted nothing; recorded, never an error.
  std::vector<std::pair<size_t, std::string>> noop_whiteouts;

  bool has_path(std::string_view path) const {
    return paths.find(std::string(path)) != paths.end();
  }
};

/// Final filesystem after applying all layers; no whiteout entries.
struct SquashedView {
  std::map<std::string, FileEntry> files;

  const FileEntry* find(std::string_view path) const {
    auto it = files.find(std::string(path));
    return it == files.end() ? nullptr : &it->second;
  }
};

/// Parses one layer archive into classified, normalized entries with
/// content digests for regular files. Throws Error(malformed_tar) or
/// Error(path_escape).
LayerDelta extract_entries(std::span<const std::byte> layer_tar, size_t layer_index);
LayerDelta extract_entries(const LayerArchive& layer);

/// Derives the per-path event history from ordered deltas. Within a layer,
/// whiteouts apply to lower state first; a path present both before and
/// after a layer that touches it yields Modified (directories and special
/// files never generate Modified events).
FileHistory build_history(const std::vector<LayerDelta>& deltas);

/// Final alive set; pure replay of each path's last event.
SquashedView squash(const FileHistory& history);

/// Squash of only the first `layer_count` layers' events.
SquashedView squash_prefix(const FileHistory& history, size_t layer_count);

/// Random-access reads of file content out of the decompressed layer tars.
class LayerStore {
 public:
  explicit LayerStore(const LoadedImage& image);

  /// Content bytes of a regular/hardlink entry; views stay valid for the
  /// lifetime of the store.
  std::string_view read(const FileEntry& entry) const;

 private:
  std::vector<std::shared_ptr<MappedFile>> layers_;
};

}  // namespace strata
