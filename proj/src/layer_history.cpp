#include "strata/layer_history.hpp"

#include <algorithm>
#include <unordered_map>

#include "strata/digest.hpp"
#include "strata/error.hpp"
#include "strata/paths.hpp"
#include "strata/tar.hpp"

namespace strata {

std::string_view to_string(FileKind kind) {
  switch (kind) {
    case FileKind::regular: return "regular";
    case FileKind::directory: return "directory";
    case FileKind::symlink: return "symlink";
    case FileKind::hardlink: return "hardlink";
    case FileKind::whiteout: return "whiteout";
    case FileKind::opaque_whiteout: return "opaque-whiteout";
    case FileKind::other: return "other";
  }
  return "other";
}

std::string_view to_string(FileAction action) {
  switch (action) {
    case FileAction::added: return "Added";
    case FileAction::modified: return "Modified";
    case FileAction::deleted: return "Deleted";
  }
  return "Added";
}

namespace {

FileKind classify(const TarMember& m, std::string_view normalized) {
  std::string_view base = basename_of(normalized);
  if (is_opaque_whiteout_name(base)) return FileKind::opaque_whiteout;
  if (is_whiteout_name(base)) return FileKind::whiteout;
  switch (m.typeflag) {
    case '0':
    case '7':
      return FileKind::regular;
    case '5': return FileKind::directory;
    case '2': return FileKind::symlink;
    case '1': return FileKind::hardlink;
    default: return FileKind::other;
  }
}

// Hardlink targets are archive-relative; normalize against the root.
std::optional<std::string> normalize_link_target(std::string_view target) {
  return normalize_tar_path(target);
}

}  // namespace

LayerDelta extract_entries(std::span<const std::byte> layer_tar, size_t layer_index) {
  LayerDelta delta;
  delta.layer_index = layer_index;

  // path -> position of entries already extracted, for intra-layer hardlinks
  std::unordered_map<std::string, size_t> seen;

  TarReader reader(layer_tar);
  while (auto member = reader.next()) {
    auto normalized = normalize_tar_path(member->path);
    if (!normalized) {
      throw Error(Errc::path_escape, "member escapes root: " + member->path);
    }
    if (*normalized == "/") continue;  // "./" self entry

    FileEntry entry;
    entry.path = *normalized;
    entry.kind = classify(*member, entry.path);
    entry.mode = member->mode;
    entry.size = member->size;
    entry.layer_index = layer_index;
    entry.data_offset = member->data_offset;

    if (entry.kind == FileKind::symlink || entry.kind == FileKind::hardlink) {
      entry.link_target = member->link_target;
      entry.size = 0;
    }
    if (entry.kind == FileKind::regular) {
      Sha256 h;
      h.update(reader.content(*member));
      entry.content_digest = h.finish_hex();
    }
    if (entry.kind == FileKind::hardlink) {
      if (auto target = normalize_link_target(member->link_target)) {
        auto it = seen.find(*target);
        if (it != seen.end()) {
          const FileEntry& t = delta.entries[it->second];
          entry.content_digest = t.content_digest;
          entry.data_offset = t.data_offset;
          entry.size = t.size;
        }
      }
      // cross-layer targets are resolved during history building
    }

    seen[entry.path] = delta.entries.size();
    delta.entries.push_back(std::move(entry));
  }
  return delta;
}

LayerDelta extract_entries(const LayerArchive& layer) {
  MappedFile mapped(layer.tar_path.string());
  return extract_entries(mapped.bytes(), layer.index);
}

namespace {

// Paths strictly under `dir` in an ordered map.
template <typename Map>
std::vector<std::string> keys_under(const Map& alive, const std::string& dir) {
  std::vector<std::string> out;
  std::string lo = dir == "/" ? "/" : dir + "/";
  for (auto it = alive.lower_bound(lo); it != alive.end(); ++it) {
    if (it->first.compare(0, lo.size(), lo) != 0) break;
    out.push_back(it->first);
  }
  return out;
}

bool generates_modified(FileKind kind) {
  return kind == FileKind::regular || kind == FileKind::symlink || kind == FileKind::hardlink;
}

}  // namespace

FileHistory build_history(const std::vector<LayerDelta>& deltas) {
  FileHistory history;
  std::map<std::string, FileEntry> alive;

  auto emit = [&history](const std::string& path, FileEvent event) {
    history.paths[path].push_back(std::move(event));
  };

  for (const LayerDelta& delta : deltas) {
    const size_t layer = delta.layer_index;

    // Final per-path entry for this layer (duplicates: last wins) and the
    // whiteout sets; whiteouts only ever target lower-layer state.
    std::map<std::string, FileEntry> incoming;
    std::vector<std::string> whiteout_targets;
    std::vector<std::string> opaque_dirs;
    for (const FileEntry& entry : delta.entries) {
      if (entry.kind == FileKind::opaque_whiteout) {
        opaque_dirs.push_back(std::string(parent_of(entry.path)));
      } else if (entry.kind == FileKind::whiteout) {
        whiteout_targets.push_back(whiteout_target(entry.path));
      } else {
        incoming[entry.path] = entry;
      }
    }

    // 1) deletions against pre-layer state
    std::map<std::string, FileEntry> removed;  // paths killed this layer
    auto kill = [&](const std::string& path) {
      auto it = alive.find(path);
      if (it == alive.end()) return;
      removed.emplace(it->first, it->second);
      alive.erase(it);
    };
    for (const std::string& dir : opaque_dirs) {
      for (const std::string& path : keys_under(alive, dir)) kill(path);
    }
    for (const std::string& target : whiteout_targets) {
      std::vector<std::string> subtree = keys_under(alive, target);
      bool existed = alive.count(target) > 0 || !subtree.empty();
      for (const std::string& path : subtree) kill(path);
      kill(target);
      if (!existed) history.noop_whiteouts.emplace_back(layer, target);
    }

    // 2) a non-directory entry shadowing a live directory hides its subtree
    for (const auto& [path, entry] : incoming) {
      auto it = alive.find(path);
      if (it != alive.end() && it->second.kind == FileKind::directory &&
          entry.kind != FileKind::directory) {
        for (const std::string& child : keys_under(alive, path)) {
          if (!incoming.count(child)) kill(child);
        }
      }
    }

    // 3) adds / modifications relative to pre-layer state
    for (auto& [path, entry] : incoming) {
      FileEntry resolved = entry;
      if (resolved.kind == FileKind::hardlink && !resolved.content_digest) {
        if (auto target = normalize_tar_path(resolved.link_target)) {
          const FileEntry* t = nullptr;
          if (auto in = incoming.find(*target); in != incoming.end()) t = &in->second;
          else if (auto al = alive.find(*target); al != alive.end()) t = &al->second;
          else if (auto rm = removed.find(*target); rm != removed.end()) t = &rm->second;
          if (t != nullptr) {
            resolved.content_digest = t->content_digest;
            resolved.data_offset = t->data_offset;
            resolved.layer_index = t->layer_index;
            resolved.size = t->size;
          }
        }
      }

      const FileEntry* prior = nullptr;
      if (auto it = alive.find(path); it != alive.end()) prior = &it->second;
      else if (auto it2 = removed.find(path); it2 != removed.end()) prior = &it2->second;

      if (prior == nullptr) {
        FileEvent ev;
        ev.layer_index = layer;
        ev.action = FileAction::added;
        ev.entry = resolved;
        emit(path, std::move(ev));
      } else if (generates_modified(resolved.kind)) {
        FileEvent ev;
        ev.layer_index = layer;
        ev.action = FileAction::modified;
        ev.entry = resolved;
        ev.prior_digest = prior->content_digest;
        emit(path, std::move(ev));
      }
      // directory (and special-file) rewrites carry no event

      alive[path] = std::move(resolved);
    }

    // 4) deletion events for what never came back
    for (const auto& [path, old_entry] : removed) {
      if (incoming.count(path)) continue;
      FileEvent ev;
      ev.layer_index = layer;
      ev.action = FileAction::deleted;
      ev.entry = old_entry;
      emit(path, std::move(ev));
    }
  }

  return history;
}

SquashedView squash(const FileHistory& history) {
  return squash_prefix(history, SIZE_MAX);
}

SquashedView squash_prefix(const FileHistory& history, size_t layer_count) {
  SquashedView view;
  for (const auto& [path, events] : history.paths) {
    const FileEvent* last = nullptr;
    for (const FileEvent& ev : events) {
      if (layer_count != SIZE_MAX && ev.layer_index >= layer_count) break;
      last = &ev;
    }
    if (last == nullptr) continue;
    if (last->action == FileAction::deleted) continue;
    view.files[path] = last->entry;
  }
  return view;
}

LayerStore::LayerStore(const LoadedImage& image) {
  layers_.reserve(image.layers.size());
  for (const LayerArchive& layer : image.layers) {
    layers_.push_back(std::make_shared<MappedFile>(layer.tar_path.string()));
  }
}

std::string_view LayerStore::read(const FileEntry& entry) const {
  if (entry.layer_index >= layers_.size()) return {};
  std::string_view whole = layers_[entry.layer_index]->view();
  if (entry.data_offset + entry.size > whole.size()) return {};
  return whole.substr(entry.data_offset, entry.size);
}

}  // namespace strata
