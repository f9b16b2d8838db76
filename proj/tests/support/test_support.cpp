#include "test_support.hpp"

#include <zlib.h>

#include <cassert>
#include <cstring>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "strata/digest.hpp"
#include "strata/paths.hpp"

namespace strata::test {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void put_octal(char* field, size_t len, uint64_t value) {
  // len-1 digits + NUL
  for (size_t i = len - 1; i-- > 0;) {
    field[i] = static_cast<char>('0' + (value & 7));
    value >>= 3;
  }
  field[len - 1] = '\0';
}

}  // namespace

void TarWriter::header(const std::string& path, char typeflag, uint64_t size, uint32_t mode,
                       const std::string& link) {
  std::string name = path;
  if (!name.empty() && name.front() == '/') name = name.substr(1);

  if (name.size() > 100) {  // GNU longname record
    std::string longname_block(512, '\0');
    std::memcpy(&longname_block[0], "././@LongLink", 13);
    put_octal(&longname_block[100], 8, 0644);
    put_octal(&longname_block[108], 8, 0);
    put_octal(&longname_block[116], 8, 0);
    put_octal(&longname_block[124], 12, name.size() + 1);
    put_octal(&longname_block[136], 12, 0);
    longname_block[156] = 'L';
    std::memcpy(&longname_block[257], "ustar ", 6);
    longname_block[263] = ' ';
    std::memset(&longname_block[148], ' ', 8);
    uint64_t sum = 0;
    for (unsigned char c : longname_block) sum += c;
    put_octal(&longname_block[148], 7, sum);
    longname_block[155] = ' ';
    buf_ += longname_block;
    std::string data = name + '\0';
    data.resize((data.size() + 511) / 512 * 512, '\0');
    buf_ += data;
    name = name.substr(0, 100);
  }

  std::string block(512, '\0');
  std::memcpy(&block[0], name.data(), name.size());
  put_octal(&block[100], 8, mode);
  put_octal(&block[108], 8, 0);
  put_octal(&block[116], 8, 0);
  put_octal(&block[124], 12, size);
  put_octal(&block[136], 12, 0);
  block[156] = typeflag;
  if (!link.empty()) {
    std::string linkname = link;
    assert(linkname.size() <= 100);
    std::memcpy(&block[157], linkname.data(), linkname.size());
  }
  std::memcpy(&block[257], "ustar", 5);
  block[263] = '0';
  block[264] = '0';

  std::memset(&block[148], ' ', 8);
  uint64_t sum = 0;
  for (unsigned char c : block) sum += c;
  put_octal(&block[148], 7, sum);
  block[155] = ' ';
  buf_ += block;
}

TarWriter& TarWriter::file(std::string path, std::string_view content, uint32_t mode) {
  header(path, '0', content.size(), mode, "");
  std::string data(content);
  data.resize((data.size() + 511) / 512 * 512, '\0');
  buf_ += data;
  return *this;
}

TarWriter& TarWriter::dir(std::string path, uint32_t mode) {
  if (path.empty() || path.back() != '/') path += '/';
  header(path, '5', 0, mode, "");
  return *this;
}

TarWriter& TarWriter::symlink(std::string path, std::string target) {
  header(path, '2', 0, 0777, target);
  return *this;
}

TarWriter& TarWriter::hardlink(std::string path, std::string target) {
  if (!target.empty() && target.front() == '/') target = target.substr(1);
  header(path, '1', 0, 0644, target);
  return *this;
}

TarWriter& TarWriter::whiteout(std::string target_path) {
  std::string_view parent = parent_of(target_path);
  std::string_view base = basename_of(target_path);
  std::string path = std::string(parent == "/" ? "" : parent) + "/.wh." + std::string(base);
  return file(path, "", 0);
}

TarWriter& TarWriter::opaque(std::string dir_path) {
  if (dir_path == "/") dir_path.clear();
  return file(dir_path + "/.wh..wh..opq", "", 0);
}

std::string TarWriter::finish() const {
  return buf_ + std::string(1024, '\0');
}

std::string gzip_compress(std::string_view data) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_BEST_SPEED, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw std::runtime_error("deflateInit failed");
  }
  std::string out;
  out.resize(deflateBound(&zs, data.size()) + 32);
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = deflate(&zs, Z_FINISH);
  if (rc != Z_STREAM_END) {
    deflateEnd(&zs);
    throw std::runtime_error("deflate failed");
  }
  out.resize(out.size() - zs.avail_out);
  deflateEnd(&zs);
  return out;
}

std::string zstd_raw_frame(std::string_view data) {
  std::string out;
  // magic
  out += "\x28\xb5\x2f\xfd";
  // descriptor 0xE0: 8-byte content size, single segment, no checksum
  out += '\xE0';
  uint64_t size = data.size();
  for (int i = 0; i < 8; ++i) out += static_cast<char>((size >> (8 * i)) & 0xff);

  size_t pos = 0;
  constexpr size_t kMaxBlock = 128 * 1024;  // block limit: min(window, 128 KB)
  do {
    size_t chunk = std::min(kMaxBlock, data.size() - pos);
    const bool last = pos + chunk == data.size();
    uint32_t block_header = (static_cast<uint32_t>(chunk) << 3) | (last ? 1u : 0u);
    // block type Raw = 0 (bits 1-2)
    out += static_cast<char>(block_header & 0xff);
    out += static_cast<char>((block_header >> 8) & 0xff);
    out += static_cast<char>((block_header >> 16) & 0xff);
    out += std::string(data.substr(pos, chunk));
    pos += chunk;
  } while (pos < data.size());
  return out;
}

ImageBuilder& ImageBuilder::layer(std::string tar, std::string created_by, Compression codec) {
  layers_.push_back({std::move(tar), created_by, codec});
  history_.push_back({std::move(created_by), false});
  return *this;
}

ImageBuilder& ImageBuilder::metadata_instruction(std::string created_by) {
  history_.push_back({std::move(created_by), true});
  return *this;
}

ImageBuilder& ImageBuilder::env(std::string key_value) {
  env_.push_back(std::move(key_value));
  return *this;
}

ImageBuilder& ImageBuilder::strip_history() {
  strip_history_ = true;
  return *this;
}

std::string ImageBuilder::config_json() const {
  ordered_json config;
  config["architecture"] = "amd64";
  config["os"] = "linux";
  ordered_json inner = ordered_json::object();
  if (!env_.empty()) inner["Env"] = env_;
  config["config"] = inner;
  if (!strip_history_) {
    ordered_json history = ordered_json::array();
    for (const HistoryItem& item : history_) {
      ordered_json entry;
      entry["created_by"] = item.created_by;
      if (item.empty_layer) entry["empty_layer"] = true;
      history.push_back(std::move(entry));
    }
    config["history"] = std::move(history);
  }
  ordered_json diff_ids = ordered_json::array();
  for (const LayerFixture& layer : layers_) {
    diff_ids.push_back("sha256:" + sha256_hex(layer.tar));
  }
  config["rootfs"] = {{"type", "layers"}, {"diff_ids", diff_ids}};
  return config.dump(2);
}

fs::path ImageBuilder::write_oci(const fs::path& dir) const {
  fs::create_directories(dir / "blobs" / "sha256");

  auto put_blob = [&dir](std::string_view content) {
    std::string digest = sha256_hex(std::string(content));
    write_file(dir / "blobs" / "sha256" / digest, content);
    return digest;
  };

  ordered_json manifest;
  manifest["schemaVersion"] = 2;
  manifest["mediaType"] = "application/vnd.oci.image.manifest.v1+json";

  std::string config = config_json();
  std::string config_digest = put_blob(config);
  manifest["config"] = {{"mediaType", "application/vnd.oci.image.config.v1+json"},
                        {"digest", "sha256:" + config_digest},
                        {"size", config.size()}};

  ordered_json layer_list = ordered_json::array();
  for (const LayerFixture& layer : layers_) {
    std::string blob;
    std::string media_type;
    switch (layer.codec) {
      case Compression::none:
        blob = layer.tar;
        media_type = "application/vnd.oci.image.layer.v1.tar";
        break;
      case Compression::gzip:
        blob = gzip_compress(layer.tar);
        media_type = "application/vnd.oci.image.layer.v1.tar+gzip";
        break;
      case Compression::zstd:
        blob = zstd_raw_frame(layer.tar);
        media_type = "application/vnd.oci.image.layer.v1.tar+zstd";
        break;
    }
    std::string digest = put_blob(blob);
    layer_list.push_back({{"mediaType", media_type},
                          {"digest", "sha256:" + digest},
                          {"size", blob.size()}});
  }
  manifest["layers"] = std::move(layer_list);

  std::string manifest_text = manifest.dump(2);
  std::string manifest_digest = put_blob(manifest_text);

  ordered_json index;
  index["schemaVersion"] = 2;
  index["manifests"] = ordered_json::array(
      {{{"mediaType", "application/vnd.oci.image.manifest.v1+json"},
        {"digest", "sha256:" + manifest_digest},
        {"size", manifest_text.size()},
        {"platform", {{"os", "linux"}, {"architecture", "amd64"}}}}});
  write_file(dir / "index.json", index.dump(2));
  write_file(dir / "oci-layout", "{\"imageLayoutVersion\":\"1.0.0\"}");
  return dir;
}

fs::path ImageBuilder::write_docker_save(const fs::path& tar_path) const {
  std::string config = config_json();
  std::string config_name = sha256_hex(config) + ".json";

  TarWriter outer;
  outer.file(config_name, config);

  ordered_json manifest_entry;
  manifest_entry["Config"] = config_name;
  manifest_entry["RepoTags"] = ordered_json::array({"fixture:latest"});
  ordered_json layer_names = ordered_json::array();
  for (size_t i = 0; i < layers_.size(); ++i) {
    std::string member = "layer" + std::to_string(i) + "/layer.tar";
    layer_names.push_back(member);
    outer.file(member, layers_[i].tar);
  }
  manifest_entry["Layers"] = std::move(layer_names);
  ordered_json top = ordered_json::array({manifest_entry});
  outer.file("manifest.json", top.dump(2));

  write_file(tar_path, outer.finish());
  return tar_path;
}

std::set<std::string> replay_alive_paths(const std::vector<LayerDelta>& deltas) {
  std::map<std::string, FileKind> state;

  auto erase_subtree = [&state](const std::string& root) {
    auto it = state.lower_bound(root + "/");
    while (it != state.end() && it->first.compare(0, root.size() + 1, root + "/") == 0) {
      it = state.erase(it);
    }
  };

  for (const LayerDelta& delta : deltas) {
    // pass 1: whiteouts act on the state left by previous layers
    for (const FileEntry& entry : delta.entries) {
      if (entry.kind == FileKind::whiteout) {
        std::string target = whiteout_target(entry.path);
        state.erase(target);
        erase_subtree(target);
      } else if (entry.kind == FileKind::opaque_whiteout) {
        erase_subtree(std::string(parent_of(entry.path)));
      }
    }
    // pass 2: additions
    for (const FileEntry& entry : delta.entries) {
      if (entry.kind == FileKind::whiteout || entry.kind == FileKind::opaque_whiteout) continue;
      auto it = state.find(entry.path);
      if (it != state.end() && it->second == FileKind::directory &&
          entry.kind != FileKind::directory) {
        erase_subtree(entry.path);
      }
      state[entry.path] = entry.kind;
    }
  }

  std::set<std::string> alive;
  for (const auto& [path, kind] : state) alive.insert(path);
  return alive;
}

std::vector<std::string> random_layer_tars(std::mt19937& rng, size_t max_layers,
                                           size_t max_files) {
  auto rand_int = [&rng](size_t lo, size_t hi) {
    return lo + static_cast<size_t>(rng() % (hi - lo + 1));
  };

  static const char* kNames[] = {"a", "b", "c", "dd", "ee", "ff"};
  auto random_path = [&]() {
    size_t depth = rand_int(1, 3);
    std::string path;
    for (size_t i = 0; i < depth; ++i) {
      path += std::string(kNames[rng() % 6]);
      if (i + 1 < depth) path += "/";
    }
    return path;
  };

  size_t layer_count = rand_int(1, max_layers);
  std::vector<std::string> tars;
  std::set<std::string> alive_dirs;
  std::set<std::string> alive_files;

  for (size_t l = 0; l < layer_count; ++l) {
    TarWriter tar;
    std::set<std::string> added_this_layer;
    size_t ops = rand_int(1, max_files);
    for (size_t i = 0; i < ops; ++i) {
      switch (rng() % 10) {
        case 0:
        case 1:
        case 2:
        case 3: {  // add/overwrite a file
          std::string path = random_path();
          tar.file(path, "data-" + std::to_string(rng() % 1000));
          added_this_layer.insert("/" + path);
          alive_files.insert("/" + path);
          break;
        }
        case 4: {  // add a directory
          std::string path = random_path();
          tar.dir(path);
          added_this_layer.insert("/" + path);
          alive_dirs.insert("/" + path);
          break;
        }
        case 5: {  // symlink
          std::string path = random_path();
          tar.symlink(path, random_path());
          added_this_layer.insert("/" + path);
          alive_files.insert("/" + path);
          break;
        }
        case 6:
        case 7: {  // whiteout something alive from earlier layers
          std::vector<std::string> candidates;
          for (const auto& p : alive_files) {
            if (!added_this_layer.count(p)) candidates.push_back(p);
          }
          for (const auto& p : alive_dirs) {
            if (!added_this_layer.count(p)) candidates.push_back(p);
          }
          if (candidates.empty()) break;
          const std::string& victim = candidates[rng() % candidates.size()];
          tar.whiteout(victim);
          alive_files.erase(victim);
          alive_dirs.erase(victim);
          break;
        }
        case 8: {  // opaque a directory
          if (alive_dirs.empty()) break;
          auto it = alive_dirs.begin();
          std::advance(it, rng() % alive_dirs.size());
          tar.opaque(*it);
          break;
        }
        default: {  // no-op whiteout for a path that never existed
          tar.whiteout("/ghost/" + std::to_string(rng() % 100));
          break;
        }
      }
    }
    tars.push_back(tar.finish());
  }
  return tars;
}

std::vector<LayerDelta> deltas_from_tars(const std::vector<std::string>& tars) {
  std::vector<LayerDelta> deltas;
  for (size_t i = 0; i < tars.size(); ++i) {
    deltas.push_back(extract_entries(
        std::as_bytes(std::span<const char>(tars[i].data(), tars[i].size())), i));
  }
  return deltas;
}

MemoryWorld::MemoryWorld(const std::string& tar_bytes)
    : image{}, history{}, view{}, store{[&]() {
        image.reference = "memory-fixture";
        image.scratch = std::make_shared<TempDir>("strata-test");
        LayerArchive layer;
        layer.index = 0;
        layer.diff_id = sha256_hex(tar_bytes);
        layer.tar_path = image.scratch->path() / "layer-0.tar";
        layer.size = tar_bytes.size();
        write_file(layer.tar_path, tar_bytes);
        image.layers.push_back(layer);
        return LayerStore(image);
      }()} {
  history = build_history(deltas_from_tars({tar_bytes}));
  view = squash(history);
}

}  // namespace strata::test
