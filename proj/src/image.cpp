#include "strata/image.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <future>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "strata/digest.hpp"
#include "strata/error.hpp"
#include "strata/tar.hpp"

namespace strata {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kOciManifest = "application/vnd.oci.image.manifest.v1+json";
constexpr std::string_view kOciIndex = "application/vnd.oci.image.index.v1+json";
constexpr std::string_view kDockerManifest =
    "application/vnd.docker.distribution.manifest.v2+json";
constexpr std::string_view kDockerManifestList =
    "application/vnd.docker.distribution.manifest.list.v2+json";

bool is_index_media_type(std::string_view mt) {
  return mt == kOciIndex || mt == kDockerManifestList;
}

bool is_manifest_media_type(std::string_view mt) {
  return mt == kOciManifest || mt == kDockerManifest || mt.empty();
}

json parse_json(std::string_view text, const char* what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw Error(Errc::malformed_manifest, std::string("invalid JSON in ") + what);
  }
  return j;
}

std::string require_digest(const json& j, const char* what) {
  if (!j.is_string()) throw Error(Errc::malformed_manifest, std::string(what) + " digest missing");
  std::string hex = parse_sha256_digest(j.get<std::string>());
  if (hex.empty()) {
    throw Error(Errc::malformed_manifest,
                std::string(what) + " digest is not sha256 hex: " + j.get<std::string>());
  }
  return hex;
}

Descriptor parse_descriptor(const json& j, const char* what) {
  Descriptor d;
  d.media_type = j.value("mediaType", "");
  d.digest = require_digest(j.contains("digest") ? j.at("digest") : json(), what);
  d.size = j.value("size", uint64_t{0});
  return d;
}

Manifest parse_manifest_json(std::string_view text) {
  json j = parse_json(text, "image manifest");
  Manifest m;
  m.schema_version = j.value("schemaVersion", 2);
  if (!j.contains("config") || !j.contains("layers")) {
    throw Error(Errc::malformed_manifest, "manifest lacks config or layers");
  }
  m.config = parse_descriptor(j.at("config"), "config");
  for (const auto& l : j.at("layers")) {
    m.layers.push_back(parse_descriptor(l, "layer"));
  }
  if (m.layers.empty()) throw Error(Errc::malformed_manifest, "manifest has no layers");
  return m;
}

ImageConfig parse_config_json(std::string_view text) {
  json j = parse_json(text, "image config");
  ImageConfig c;
  c.os = j.value("os", "");
  if (j.contains("config") && j.at("config").is_object()) {
    const json& cc = j.at("config");
    if (cc.contains("Env") && cc.at("Env").is_array()) {
      for (const auto& e : cc.at("Env")) {
        if (e.is_string()) c.env.push_back(e.get<std::string>());
      }
    }
  }
  if (j.contains("history") && j.at("history").is_array()) {
    for (const auto& h : j.at("history")) {
      HistoryEntry e;
      e.created_by = h.value("created_by", "");
      e.empty_layer = h.value("empty_layer", false);
      c.history.push_back(std::move(e));
    }
  }
  if (j.contains("rootfs") && j.at("rootfs").contains("diff_ids")) {
    for (const auto& d : j.at("rootfs").at("diff_ids")) {
      c.diff_ids.push_back(require_digest(d, "diff_id"));
    }
  }
  return c;
}

struct ResolvedManifest {
  std::string blob;    // manifest JSON text
  std::string digest;  // sha256 hex of the blob
};

class OciLayout {
 public:
  explicit OciLayout(fs::path root) : root_(std::move(root)) {}

  std::string read_blob(const std::string& digest_hex) const {
    fs::path p = root_ / "blobs" / "sha256" / digest_hex;
    if (!fs::exists(p)) {
      throw Error(Errc::malformed_manifest, "missing blob sha256:" + digest_hex);
    }
    std::string data = read_file(p);
    if (sha256_hex(data) != digest_hex) {
      throw Error(Errc::digest_mismatch, "blob sha256:" + digest_hex + " fails verification");
    }
    return data;
  }

  fs::path blob_path(const std::string& digest_hex) const {
    return root_ / "blobs" / "sha256" / digest_hex;
  }

  ResolvedManifest resolve_manifest(const Platform& platform) const {
    fs::path index_path = root_ / "index.json";
    if (!fs::exists(index_path)) {
      throw Error(Errc::malformed_manifest, "no index.json in " + root_.string());
    }
    json index = parse_json(read_file(index_path), "index.json");
    return descend(index, platform, 0);
  }

 private:
  ResolvedManifest descend(const json& index, const Platform& platform, int depth) const {
    if (depth > 3) throw Error(Errc::malformed_manifest, "manifest index nesting too deep");
    if (!index.contains("manifests") || !index.at("manifests").is_array() ||
        index.at("manifests").empty()) {
      throw Error(Errc::malformed_manifest, "index has no manifests");
    }
    const json& manifests = index.at("manifests");

    auto pick = [&]() -> const json* {
      const json* untagged = nullptr;
      for (const auto& entry : manifests) {
        if (entry.contains("annotations")) {
          const auto& ann = entry.at("annotations");
          if (ann.contains("vnd.docker.reference.type")) continue;  // attestations
        }
        if (!entry.contains("platform")) {
          if (untagged == nullptr) untagged = &entry;
          continue;
        }
        const json& p = entry.at("platform");
        if (p.value("os", "") == platform.os && p.value("architecture", "") == platform.arch) {
          return &entry;
        }
        if (p.value("os", "") == "unknown") continue;
      }
      return untagged;
    };

    const json* chosen = pick();
    if (chosen == nullptr) {
      throw Error(Errc::platform_unavailable,
                  "no manifest for platform " + platform.os + "/" + platform.arch);
    }
    std::string digest = require_digest((*chosen).contains("digest") ? chosen->at("digest") : json(),
                                        "manifest");
    std::string blob = read_blob(digest);
    std::string media_type = chosen->value("mediaType", "");
    if (media_type.empty()) {
      json probe = parse_json(blob, "manifest blob");
      media_type = probe.value("mediaType", "");
      if (media_type.empty() && probe.contains("manifests")) media_type = std::string(kOciIndex);
    }
    if (is_index_media_type(media_type)) {
      return descend(parse_json(blob, "nested index"), platform, depth + 1);
    }
    if (!is_manifest_media_type(media_type)) {
      throw Error(Errc::unsupported_media_type, "manifest media type " + media_type);
    }
    return {std::move(blob), std::move(digest)};
  }

  fs::path root_;
};

// Decompresses one layer blob to tar_path while hashing the output.
std::string spool_layer(std::span<const std::byte> blob, std::string_view media_type,
                        const fs::path& tar_path, uint64_t* out_size) {
  std::FILE* f = std::fopen(tar_path.c_str(), "wb");
  if (f == nullptr) throw Error(Errc::io_error, "cannot create " + tar_path.string());
  Sha256 hash;
  uint64_t total = 0;
  try {
    decompress_layer(blob, media_type, [&](std::span<const std::byte> chunk) {
      hash.update(chunk);
      total += chunk.size();
      if (std::fwrite(chunk.data(), 1, chunk.size(), f) != chunk.size()) {
        throw Error(Errc::io_error, "write failed on " + tar_path.string());
      }
    });
  } catch (...) {
    std::fclose(f);
    throw;
  }
  if (std::fclose(f) != 0) throw Error(Errc::io_error, "close failed on " + tar_path.string());
  *out_size = total;
  return hash.finish_hex();
}

struct LayerJob {
  size_t index;
  fs::path blob_path;       // set for OCI layouts
  std::string media_type;
  std::string expect_blob_digest;   // compressed digest, empty to skip check
  std::span<const std::byte> bytes; // set for docker-save members
};

void run_layer_jobs(const std::vector<LayerJob>& jobs, const fs::path& scratch,
                    const ImageConfig& config, unsigned parallelism,
                    std::vector<LayerArchive>* out) {
  out->resize(jobs.size());
  if (parallelism == 0) {
    parallelism = std::max(1u, std::min(4u, std::thread::hardware_concurrency()));
  }

  std::atomic<size_t> next{0};
  std::vector<std::future<void>> workers;
  auto work = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const LayerJob& job = jobs[i];
      fs::path tar_path = scratch / ("layer-" + std::to_string(job.index) + ".tar");

      std::optional<MappedFile> mapped;
      std::span<const std::byte> blob = job.bytes;
      if (!job.blob_path.empty()) {
        mapped.emplace(job.blob_path.string());
        blob = mapped->bytes();
      }
      if (!job.expect_blob_digest.empty()) {
        Sha256 h;
        h.update(blob);
        if (h.finish_hex() != job.expect_blob_digest) {
          throw Error(Errc::digest_mismatch,
                      "layer blob sha256:" + job.expect_blob_digest + " fails verification");
        }
      }
      LayerArchive layer;
      layer.index = job.index;
      layer.tar_path = tar_path;
      layer.diff_id = spool_layer(blob, job.media_type, tar_path, &layer.size);
      if (job.index < config.diff_ids.size() && layer.diff_id != config.diff_ids[job.index]) {
        throw Error(Errc::digest_mismatch,
                    "layer " + std::to_string(job.index) + " diff_id mismatch: got sha256:" +
                        layer.diff_id + " want sha256:" + config.diff_ids[job.index]);
      }
      (*out)[job.index] = std::move(layer);
    }
  };
  unsigned n = std::min<unsigned>(parallelism, static_cast<unsigned>(jobs.size()));
  for (unsigned t = 0; t + 1 < n; ++t) {
    workers.push_back(std::async(std::launch::async, work));
  }
  work();
  for (auto& w : workers) w.get();  // propagate the first failure
}

void validate_counts(const Manifest& manifest, const ImageConfig& config) {
  if (!config.diff_ids.empty() && config.diff_ids.size() != manifest.layers.size()) {
    throw Error(Errc::malformed_manifest,
                "rootfs lists " + std::to_string(config.diff_ids.size()) + " diff_ids for " +
                    std::to_string(manifest.layers.size()) + " layers");
  }
}

LoadedImage load_oci_layout(const fs::path& root, const Platform& platform, unsigned jobs) {
  OciLayout layout(root);
  ResolvedManifest resolved = layout.resolve_manifest(platform);

  LoadedImage image;
  image.reference = root.string();
  image.manifest_digest = resolved.digest;
  image.manifest = parse_manifest_json(resolved.blob);

  std::string config_blob = layout.read_blob(image.manifest.config.digest);
  image.image_id = image.manifest.config.digest;
  image.config = parse_config_json(config_blob);
  validate_counts(image.manifest, image.config);
  image.layer_to_history = align_history(image.config, image.manifest.layers.size());

  image.scratch = std::make_shared<TempDir>("strata-img");
  std::vector<LayerJob> layer_jobs;
  for (size_t i = 0; i < image.manifest.layers.size(); ++i) {
    const Descriptor& d = image.manifest.layers[i];
    compression_for_media_type(d.media_type);  // reject unknown types before spawning work
    LayerJob job;
    job.index = i;
    job.blob_path = layout.blob_path(d.digest);
    if (!fs::exists(job.blob_path)) {
      throw Error(Errc::malformed_manifest, "missing layer blob sha256:" + d.digest);
    }
    job.media_type = d.media_type;
    job.expect_blob_digest = d.digest;
    layer_jobs.push_back(std::move(job));
  }
  run_layer_jobs(layer_jobs, image.scratch->path(), image.config, jobs, &image.layers);
  return image;
}

Compression sniff_compression(std::span<const std::byte> data) {
  const auto* u = reinterpret_cast<const unsigned char*>(data.data());
  if (data.size() >= 2 && u[0] == 0x1f && u[1] == 0x8b) return Compression::gzip;
  if (data.size() >= 4 && u[0] == 0x28 && u[1] == 0xb5 && u[2] == 0x2f && u[3] == 0xfd) {
    return Compression::zstd;
  }
  return Compression::none;
}

std::string media_type_for(Compression c) {
  switch (c) {
    case Compression::gzip: return "application/vnd.oci.image.layer.v1.tar+gzip";
    case Compression::zstd: return "application/vnd.oci.image.layer.v1.tar+zstd";
    case Compression::none: break;
  }
  return "application/vnd.oci.image.layer.v1.tar";
}

LoadedImage load_docker_save(const fs::path& tar_file, const Platform& platform, unsigned jobs) {
  MappedFile archive(tar_file.string());

  std::unordered_map<std::string, TarMember> members;
  TarReader reader(archive.bytes());
  while (auto m = reader.next()) {
    std::string key = m->path;
    if (key.rfind("./", 0) == 0) key = key.substr(2);
    members[key] = *m;
  }

  auto member_bytes = [&](const std::string& name) -> std::span<const std::byte> {
    auto it = members.find(name);
    if (it == members.end()) {
      throw Error(Errc::malformed_manifest, "docker-save tar lacks " + name);
    }
    return archive.bytes().subspan(it->second.data_offset, it->second.size);
  };
  auto member_text = [&](const std::string& name) {
    auto b = member_bytes(name);
    return std::string(reinterpret_cast<const char*>(b.data()), b.size());
  };

  // docker >= 25 writes an OCI layout into the save tar; prefer it.
  if (members.contains("index.json") && members.contains("oci-layout")) {
    TempDir extracted("strata-save");
    for (const auto& [name, member] : members) {
      if (member.typeflag == '5') continue;
      fs::path dest = extracted.path() / name;
      fs::create_directories(dest.parent_path());
      auto bytes = archive.bytes().subspan(member.data_offset, member.size);
      write_file(dest, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    }
    LoadedImage image = load_oci_layout(extracted.path(), platform, jobs);
    image.reference = tar_file.string();
    // layers were spooled into image.scratch; the extracted layout can go
    return image;
  }

  json top = parse_json(member_text("manifest.json"), "manifest.json");
  if (!top.is_array() || top.empty()) {
    throw Error(Errc::malformed_manifest, "manifest.json is not a non-empty array");
  }
  const json& entry = top.at(0);
  std::string config_name = entry.value("Config", "");
  if (config_name.empty()) throw Error(Errc::malformed_manifest, "manifest.json lacks Config");

  std::string config_blob = member_text(config_name);

  LoadedImage image;
  image.reference = tar_file.string();
  image.image_id = sha256_hex(config_blob);
  image.config = parse_config_json(config_blob);

  image.manifest.schema_version = 2;
  image.manifest.config = {"application/vnd.docker.container.image.v1+json", image.image_id,
                           config_blob.size()};

  std::vector<LayerJob> layer_jobs;
  if (!entry.contains("Layers") || !entry.at("Layers").is_array() || entry.at("Layers").empty()) {
    throw Error(Errc::malformed_manifest, "manifest.json lacks Layers");
  }
  size_t index = 0;
  for (const auto& layer_name : entry.at("Layers")) {
    auto bytes = member_bytes(layer_name.get<std::string>());
    Compression codec = sniff_compression(bytes);
    Descriptor d;
    d.media_type = media_type_for(codec);
    Sha256 h;
    h.update(bytes);
    d.digest = h.finish_hex();
    d.size = bytes.size();
    image.manifest.layers.push_back(d);

    LayerJob job;
    job.index = index++;
    job.media_type = d.media_type;
    job.bytes = bytes;
    layer_jobs.push_back(std::move(job));
  }

  validate_counts(image.manifest, image.config);
  image.layer_to_history = align_history(image.config, image.manifest.layers.size());
  image.scratch = std::make_shared<TempDir>("strata-img");
  run_layer_jobs(layer_jobs, image.scratch->path(), image.config, jobs, &image.layers);
  return image;
}

}  // namespace

ImageSource classify_source(const std::string& locator) {
  std::error_code ec;
  if (fs::is_directory(locator, ec)) return {SourceKind::oci_layout_dir, locator};
  if (fs::is_regular_file(locator, ec)) return {SourceKind::docker_save_tar, locator};
  if (!locator.empty() && (locator.front() == '/' || locator.front() == '.')) {
    throw Error(Errc::io_error, "no such file or directory: " + locator);
  }
  return {SourceKind::registry_reference, locator};
}

Compression compression_for_media_type(std::string_view media_type) {
  static const std::unordered_map<std::string_view, Compression> kKnown = {
      {"application/vnd.oci.image.layer.v1.tar", Compression::none},
      {"application/vnd.oci.image.layer.v1.tar+gzip", Compression::gzip},
      {"application/vnd.oci.image.layer.v1.tar+zstd", Compression::zstd},
      {"application/vnd.oci.image.layer.nondistributable.v1.tar", Compression::none},
      {"application/vnd.oci.image.layer.nondistributable.v1.tar+gzip", Compression::gzip},
      {"application/vnd.oci.image.layer.nondistributable.v1.tar+zstd", Compression::zstd},
      {"application/vnd.docker.image.rootfs.diff.tar", Compression::none},
      {"application/vnd.docker.image.rootfs.diff.tar.gzip", Compression::gzip},
      {"application/vnd.docker.image.rootfs.foreign.diff.tar.gzip", Compression::gzip},
  };
  auto it = kKnown.find(media_type);
  if (it == kKnown.end()) {
    throw Error(Errc::unsupported_media_type, std::string(media_type));
  }
  return it->second;
}

void decompress_layer(std::span<const std::byte> blob, std::string_view media_type,
                      const ByteSink& sink) {
  decompress(compression_for_media_type(media_type), blob, sink);
}

std::vector<size_t> align_history(const ImageConfig& config, size_t layer_count) {
  std::vector<size_t> mapping;
  for (size_t i = 0; i < config.history.size(); ++i) {
    if (!config.history[i].empty_layer) mapping.push_back(i);
  }
  if (config.history.empty()) {
    // images stripped of history: identity mapping keeps downstream total
    mapping.resize(layer_count);
    for (size_t i = 0; i < layer_count; ++i) mapping[i] = i;
    return mapping;
  }
  if (mapping.size() != layer_count) {
    throw Error(Errc::malformed_manifest,
                "history lists " + std::to_string(mapping.size()) +
                    " filesystem entries for " + std::to_string(layer_count) + " layers");
  }
  return mapping;
}

LoadedImage load_image(const ImageSource& source, const Platform& platform, unsigned jobs) {
  switch (source.kind) {
    case SourceKind::oci_layout_dir:
      if (!fs::is_directory(source.locator)) {
        throw Error(Errc::io_error, "not a directory: " + source.locator);
      }
      return load_oci_layout(source.locator, platform, jobs);
    case SourceKind::docker_save_tar:
      if (!fs::is_regular_file(source.locator)) {
        throw Error(Errc::io_error, "not a file: " + source.locator);
      }
      return load_docker_save(source.locator, platform, jobs);
    case SourceKind::registry_reference:
      throw Error(Errc::usage,
                  "registry references must be materialized with registry::pull first");
  }
  throw Error(Errc::usage, "unknown source kind");
}

}  // namespace strata
