#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "strata/registry.hpp"

#include <atomic>
#include <cstdlib>
#include <future>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "strata/digest.hpp"
#include "strata/error.hpp"
#include "strata/io.hpp"

namespace strata {
namespace registry {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::string_view kAcceptManifests =
    "application/vnd.oci.image.manifest.v1+json, "
    "application/vnd.oci.image.index.v1+json, "
    "application/vnd.docker.distribution.manifest.v2+json, "
    "application/vnd.docker.distribution.manifest.list.v2+json";

// WWW-Authenticate: Bearer realm="https://auth...",service="...",scope="..."
struct BearerChallenge {
  std::string realm;
  std::string service;
  std::string scope;
};

std::optional<BearerChallenge> parse_challenge(std::string_view header) {
  if (header.rfind("Bearer ", 0) != 0 && header.rfind("bearer ", 0) != 0) return std::nullopt;
  BearerChallenge challenge;
  std::string_view params = header.substr(7);
  size_t pos = 0;
  while (pos < params.size()) {
    size_t eq = params.find('=', pos);
    if (eq == std::string_view::npos) break;
    std::string key(params.substr(pos, eq - pos));
    while (!key.empty() && (key.front() == ' ' || key.front() == ',')) key.erase(key.begin());
    size_t value_begin = eq + 1;
    std::string value;
    if (value_begin < params.size() && params[value_begin] == '"') {
      size_t close = params.find('"', value_begin + 1);
      if (close == std::string_view::npos) break;
      value = std::string(params.substr(value_begin + 1, close - value_begin - 1));
      pos = close + 1;
    } else {
      size_t comma = params.find(',', value_begin);
      if (comma == std::string_view::npos) comma = params.size();
      value = std::string(params.substr(value_begin, comma - value_begin));
      pos = comma;
    }
    if (pos < params.size() && params[pos] == ',') ++pos;
    if (key == "realm") challenge.realm = value;
    else if (key == "service") challenge.service = value;
    else if (key == "scope") challenge.scope = value;
  }
  if (challenge.realm.empty()) return std::nullopt;
  return challenge;
}

void apply_proxy_env(httplib::Client& client, bool tls) {
  const char* raw = std::getenv(tls ? "https_proxy" : "http_proxy");
  if (raw == nullptr) raw = std::getenv(tls ? "HTTPS_PROXY" : "HTTP_PROXY");
  if (raw == nullptr) return;
  std::string proxy = raw;
  size_t scheme = proxy.find("://");
  if (scheme != std::string::npos) proxy = proxy.substr(scheme + 3);
  size_t colon = proxy.rfind(':');
  if (colon == std::string::npos) return;
  int port = std::atoi(proxy.substr(colon + 1).c_str());
  if (port > 0) client.set_proxy(proxy.substr(0, colon), port);
}

class Session {
 public:
  Session(const ImageReference& ref, const PullOptions& options)
      : ref_(ref),
        options_(options),
        base_url_((options.plain_http ? "http://" : "https://") + ref.host) {}

  std::unique_ptr<httplib::Client> make_client() const {
    auto client = std::make_unique<httplib::Client>(base_url_);
    client->set_connection_timeout(20);
    client->set_read_timeout(120);
    client->set_follow_location(true);
    apply_proxy_env(*client, !options_.plain_http);
    return client;
  }

  httplib::Headers auth_headers() const {
    std::lock_guard<std::mutex> lock(mutex_);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
    return headers;
  }

  // GET with one retry after negotiating a bearer token on 401.
  httplib::Result get(const std::string& path, const httplib::Headers& extra = {}) {
    auto client = make_client();
    httplib::Headers headers = auth_headers();
    headers.insert(extra.begin(), extra.end());
    auto res = client->Get(path, headers);
    if (res && res->status == 401) {
      negotiate_token(res->get_header_value("WWW-Authenticate"));
      headers = auth_headers();
      headers.insert(extra.begin(), extra.end());
      res = client->Get(path, headers);
    }
    return res;
  }

 private:
  void negotiate_token(const std::string& challenge_header) {
    auto challenge = parse_challenge(challenge_header);
    if (!challenge) {
      throw Error(Errc::auth_failed, "registry sent 401 without a usable bearer challenge");
    }
    std::string scope = challenge->scope.empty()
                            ? "repository:" + ref_.repository + ":pull"
                            : challenge->scope;

    // the realm may live on a different host
    size_t scheme_end = challenge->realm.find("://");
    if (scheme_end == std::string::npos) {
      throw Error(Errc::auth_failed, "malformed bearer realm " + challenge->realm);
    }
    size_t path_begin = challenge->realm.find('/', scheme_end + 3);
    std::string realm_base = challenge->realm.substr(0, path_begin);
    std::string realm_path =
        path_begin == std::string::npos ? "/" : challenge->realm.substr(path_begin);

    httplib::Client auth_client(realm_base);
    auth_client.set_follow_location(true);
    apply_proxy_env(auth_client, realm_base.rfind("https", 0) == 0);
    if (!options_.username.empty()) {
      auth_client.set_basic_auth(options_.username, options_.password);
    }
    httplib::Params params{{"service", challenge->service}, {"scope", scope}};
    auto res = auth_client.Get(httplib::append_query_params(realm_path, params));
    if (!res || res->status != 200) {
      throw Error(Errc::auth_failed,
                  "token endpoint returned " + (res ? std::to_string(res->status) : "no response"));
    }
    json body = json::parse(res->body, nullptr, false);
    if (body.is_discarded()) throw Error(Errc::auth_failed, "token endpoint sent invalid JSON");
    std::string token = body.value("token", body.value("access_token", ""));
    if (token.empty()) throw Error(Errc::auth_failed, "token endpoint sent no token");
    std::lock_guard<std::mutex> lock(mutex_);
    token_ = std::move(token);
  }

  ImageReference ref_;
  PullOptions options_;
  std::string base_url_;
  mutable std::mutex mutex_;
  std::string token_;
};

struct FetchedManifest {
  std::string body;
  std::string digest;      // verified sha256 hex
  std::string media_type;
};

FetchedManifest fetch_manifest(Session& session, const ImageReference& ref,
                               const std::string& reference) {
  httplib::Headers accept{{"Accept", std::string(kAcceptManifests)}};
  auto res = session.get("/v2/" + ref.repository + "/manifests/" + reference, accept);
  if (!res) throw Error(Errc::io_error, "registry unreachable: " + httplib::to_string(res.error()));
  if (res->status == 404) {
    throw Error(Errc::manifest_not_found, ref.display() + " (" + reference + ")");
  }
  if (res->status == 401 || res->status == 403) {
    throw Error(Errc::auth_failed, "registry denied access to " + ref.repository);
  }
  if (res->status != 200) {
    throw Error(Errc::io_error, "manifest request returned " + std::to_string(res->status));
  }
  FetchedManifest out;
  out.body = res->body;
  out.digest = sha256_hex(out.body);
  if (reference.rfind("sha256:", 0) == 0 && "sha256:" + out.digest != reference) {
    throw Error(Errc::digest_mismatch, "manifest body does not match requested " + reference);
  }
  out.media_type = res->get_header_value("Content-Type");
  if (out.media_type.empty()) {
    json probe = json::parse(out.body, nullptr, false);
    if (!probe.is_discarded()) out.media_type = probe.value("mediaType", "");
  }
  return out;
}

std::string select_platform_manifest(const json& index, const Platform& platform,
                                     const ImageReference& ref) {
  if (!index.contains("manifests") || !index.at("manifests").is_array()) {
    throw Error(Errc::malformed_manifest, "index without manifests from registry");
  }
  const json* untagged = nullptr;
  for (const json& entry : index.at("manifests")) {
    if (entry.contains("annotations") &&
        entry.at("annotations").contains("vnd.docker.reference.type")) {
      continue;
    }
    if (!entry.contains("platform")) {
      if (untagged == nullptr) untagged = &entry;
      continue;
    }
    const json& p = entry.at("platform");
    if (p.value("os", "") == platform.os && p.value("architecture", "") == platform.arch) {
      return entry.value("digest", "");
    }
  }
  if (untagged != nullptr) return untagged->value("digest", "");
  throw Error(Errc::platform_unavailable,
              ref.display() + " has no manifest for " + platform.os + "/" + platform.arch);
}

class LayoutWriter {
 public:
  explicit LayoutWriter(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_ / "blobs" / "sha256");
  }

  bool has_blob(const std::string& digest_hex) const {
    std::error_code ec;
    return fs::exists(root_ / "blobs" / "sha256" / digest_hex, ec);
  }

  // content-addressed write: temp name first, rename after verification
  void put_blob(const std::string& digest_hex, std::string_view content) {
    if (sha256_hex(std::string(content)) != digest_hex) {
      throw Error(Errc::digest_mismatch, "blob sha256:" + digest_hex + " fails verification");
    }
    fs::path final_path = root_ / "blobs" / "sha256" / digest_hex;
    if (fs::exists(final_path)) return;
    fs::path tmp = final_path;
    tmp += ".tmp-" + std::to_string(
        std::hash<std::thread::id>{}(std::this_thread::get_id()) & 0xffff);
    write_file(tmp, content);
    fs::rename(tmp, final_path);
  }

  void finalize(const std::string& manifest_digest, const std::string& media_type,
                uint64_t size, const std::string& ref_name) {
    write_file(root_ / "oci-layout", "{\"imageLayoutVersion\":\"1.0.0\"}\n");
    nlohmann::ordered_json index;
    index["schemaVersion"] = 2;
    nlohmann::ordered_json entry;
    entry["mediaType"] = media_type.empty()
                             ? "application/vnd.oci.image.manifest.v1+json"
                             : media_type;
    entry["digest"] = "sha256:" + manifest_digest;
    entry["size"] = size;
    entry["annotations"] = {{"org.opencontainers.image.ref.name", ref_name}};
    index["manifests"] = nlohmann::ordered_json::array({entry});
    write_file(root_ / "index.json", index.dump(2) + "\n");
  }

 private:
  fs::path root_;
};

}  // namespace

ImageReference ImageReference::parse(std::string_view reference) {
  if (reference.empty()) throw Error(Errc::usage, "empty image reference");
  ImageReference out;

  std::string_view rest = reference;
  if (size_t at = rest.find('@'); at != std::string_view::npos) {
    std::string digest = parse_sha256_digest(rest.substr(at + 1));
    if (digest.empty()) {
      throw Error(Errc::usage, "unsupported digest in reference: " + std::string(reference));
    }
    out.digest = digest;
    rest = rest.substr(0, at);
  }

  // host present when the first path component has a dot, a port, or is
  // the literal "localhost"
  std::string_view path = rest;
  size_t slash = rest.find('/');
  if (slash != std::string_view::npos) {
    std::string_view head = rest.substr(0, slash);
    if (head.find('.') != std::string_view::npos || head.find(':') != std::string_view::npos ||
        head == "localhost") {
      out.host = std::string(head);
      path = rest.substr(slash + 1);
    }
  }
  if (out.host.empty() || out.host == "docker.io") out.host = "registry-1.docker.io";

  // tag after the last colon, unless that colon belongs to a port (no
  // slash may follow it)
  if (size_t colon = path.rfind(':'); colon != std::string_view::npos) {
    if (path.find('/', colon) == std::string_view::npos) {
      out.tag = std::string(path.substr(colon + 1));
      path = path.substr(0, colon);
    }
  }
  if (path.empty()) throw Error(Errc::usage, "reference lacks a repository");
  out.repository = std::string(path);
  if (out.host == "registry-1.docker.io" && out.repository.find('/') == std::string::npos) {
    out.repository = "library/" + out.repository;
  }
  if (out.tag.empty()) out.tag = "latest";
  return out;
}

std::string ImageReference::display() const {
  std::string s = host + "/" + repository + ":" + tag;
  if (!digest.empty()) s += "@sha256:" + digest;
  return s;
}

ImageSource pull(const ImageReference& ref, const std::filesystem::path& dest,
                 const PullOptions& options) {
  Session session(ref, options);
  LayoutWriter layout(dest);

  FetchedManifest top = fetch_manifest(session, ref, ref.manifest_reference());
  json parsed = json::parse(top.body, nullptr, false);
  if (parsed.is_discarded()) {
    throw Error(Errc::malformed_manifest, "registry sent invalid manifest JSON");
  }

  FetchedManifest manifest = top;
  const bool is_index = parsed.contains("manifests");
  if (is_index) {
    std::string digest = select_platform_manifest(parsed, options.platform, ref);
    if (parse_sha256_digest(digest).empty()) {
      throw Error(Errc::malformed_manifest, "index entry without sha256 digest");
    }
    manifest = fetch_manifest(session, ref, digest);
    parsed = json::parse(manifest.body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("layers")) {
      throw Error(Errc::malformed_manifest, "platform manifest is not an image manifest");
    }
  }

  // collect blob digests: config + layers
  std::vector<std::string> blob_digests;
  if (!parsed.contains("config") || !parsed.contains("layers")) {
    throw Error(Errc::malformed_manifest, "manifest lacks config or layers");
  }
  std::string config_digest = parse_sha256_digest(parsed.at("config").value("digest", ""));
  if (config_digest.empty()) throw Error(Errc::malformed_manifest, "config digest missing");
  blob_digests.push_back(config_digest);
  for (const json& layer : parsed.at("layers")) {
    std::string digest = parse_sha256_digest(layer.value("digest", ""));
    if (digest.empty()) throw Error(Errc::malformed_manifest, "layer digest missing");
    blob_digests.push_back(digest);
  }

  std::atomic<size_t> next{0};
  auto fetch_worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= blob_digests.size()) return;
      const std::string& digest = blob_digests[i];
      if (layout.has_blob(digest)) continue;  // content-addressed cache hit
      auto res = session.get("/v2/" + ref.repository + "/blobs/sha256:" + digest);
      if (!res || res->status != 200) {
        throw Error(Errc::io_error, "blob sha256:" + digest + " fetch failed (" +
                                        (res ? std::to_string(res->status) : "unreachable") + ")");
      }
      layout.put_blob(digest, res->body);
    }
  };

  unsigned workers = std::max(1u, options.concurrency);
  workers = std::min<unsigned>(workers, blob_digests.size());
  std::vector<std::future<void>> tasks;
  for (unsigned t = 0; t + 1 < workers; ++t) {
    tasks.push_back(std::async(std::launch::async, fetch_worker));
  }
  fetch_worker();
  std::exception_ptr failure;
  for (auto& task : tasks) {
    try {
      task.get();
    } catch (...) {
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  layout.put_blob(manifest.digest, manifest.body);
  layout.finalize(manifest.digest, manifest.media_type, manifest.body.size(), ref.display());
  return ImageSource{SourceKind::oci_layout_dir, dest.string()};
}

}  // namespace registry
}  // namespace strata
