#include <algorithm>
#include <cctype>
#include <cstring>

#include "strata/analyzers.hpp"
#include "strata/digest.hpp"
#include "strata/paths.hpp"

namespace strata {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// 14-byte magic opening the aligned build-info block
constexpr char kBuildInfoMagic[] = "\xff Go buildinf:";
constexpr size_t kMagicLen = 14;
constexpr uint8_t kFlagInlineStrings = 0x2;

// the embedded module text sits between fixed 16-byte sentinels
constexpr unsigned char kInfoStart[16] = {0x30, 0x77, 0xaf, 0x0c, 0x92, 0x74, 0x08, 0x02,
                                          0x41, 0xe1, 0xc1, 0x07, 0xe6, 0xd6, 0x18, 0xe6};
constexpr unsigned char kInfoEnd[16] = {0xf9, 0x32, 0x43, 0x39, 0x71, 0xe1, 0xb2, 0x21,
                                        0x4b, 0xf5, 0xf3, 0x1e, 0xd0, 0xb8, 0x38, 0xc4};

std::optional<uint64_t> read_uvarint(std::string_view data, size_t* pos) {
  uint64_t value = 0;
  int shift = 0;
  while (*pos < data.size() && shift < 64) {
    uint8_t b = static_cast<uint8_t>(data[*pos]);
    ++*pos;
    value |= uint64_t(b & 0x7f) << shift;
    if ((b & 0x80) == 0) return value;
    shift += 7;
  }
  return std::nullopt;
}

std::optional<std::string_view> read_prefixed_string(std::string_view data, size_t* pos) {
  auto len = read_uvarint(data, pos);
  if (!len || *pos + *len > data.size()) return std::nullopt;
  std::string_view out = data.substr(*pos, *len);
  *pos += *len;
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    if (eol > pos) lines.push_back(text.substr(pos, eol - pos));
    if (eol == text.size()) break;
    pos = eol + 1;
  }
  return lines;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t pos = 0;
  while (pos <= line.size()) {
    size_t tab = line.find('\t', pos);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
  return fields;
}

Package module_package(std::string_view name, std::string_view version,
                        const std::string& binary_path) {
  Package pkg;
  pkg.ecosystem = Ecosystem::golang;
  pkg.name = std::string(name);
  if (!version.empty() && version != "(devel)") pkg.version = std::string(version);
  pkg.metadata_files.push_back(binary_path);
  pkg.owned_files.push_back(binary_path);
  return pkg;
}

}  // namespace

std::vector<Package> scan_go_binary(std::string_view content, const std::string& path,
                                    std::vector<AnalyzerWarning>* warnings) {
  std::vector<Package> packages;
  size_t at = content.find(std::string_view(kBuildInfoMagic, kMagicLen));
  if (at == std::string_view::npos) return packages;
  if (at + 32 > content.size()) return packages;

  const uint8_t flags = static_cast<uint8_t>(content[at + 15]);
  if ((flags & kFlagInlineStrings) == 0) {
    // pre-go1.18 layout stores pointers into the data segment; recovering
    // them needs a full object-file reader
    if (warnings != nullptr) {
      warnings->push_back({"go", "go-binary-with-unreadable-buildinfo: " + path});
    }
    return packages;
  }

  size_t pos = at + 32;
  auto version = read_prefixed_string(content, &pos);
  auto modinfo = read_prefixed_string(content, &pos);
  if (!version || !modinfo) {
    if (warnings != nullptr) {
      warnings->push_back({"go", "truncated buildinfo block in " + path});
    }
    return packages;
  }

  std::string_view mod = *modinfo;
  if (mod.size() >= 33 && mod[mod.size() - 17] == '\n' &&
      std::memcmp(mod.data(), kInfoStart, 16) == 0 &&
      std::memcmp(mod.data() + mod.size() - 16, kInfoEnd, 16) == 0) {
    mod = mod.substr(16, mod.size() - 32);
  }

  Package* last_dep = nullptr;
  for (std::string_view line : split_lines(mod)) {
    std::vector<std::string_view> fields = split_tabs(line);
    if (fields.size() < 2) continue;
    std::string_view tag = fields[0];
    if (tag == "mod" && fields.size() >= 3) {
      packages.push_back(module_package(fields[1], fields[2], path));
      last_dep = nullptr;
    } else if (tag == "dep" && fields.size() >= 3) {
      packages.push_back(module_package(fields[1], fields[2], path));
      last_dep = &packages.back();
    } else if (tag == "=>" && fields.size() >= 3 && last_dep != nullptr) {
      // replacement directive: the replacing module is what is built in
      *last_dep = module_package(fields[1], fields[2], path);
    }
  }
  return packages;
}

std::vector<Package> parse_go(const SquashedView& view, const LayerStore& store,
                              GoScanCache* cache, std::vector<AnalyzerWarning>* warnings) {
  std::vector<Package> packages;

  for (const auto& [path, entry] : view.files) {
    if (entry.kind != FileKind::regular && entry.kind != FileKind::hardlink) continue;
    std::string_view base = basename_of(path);

    if (base == "go.mod") {
      std::string content(store.read(entry));
      bool in_require = false;
      for (std::string_view raw : split_lines(content)) {
        std::string_view line = trim(raw);
        if (size_t comment = line.find("//"); comment != std::string_view::npos) {
          line = trim(line.substr(0, comment));
        }
        if (line.empty()) continue;
        if (line == "require (") {
          in_require = true;
          continue;
        }
        if (in_require && line == ")") {
          in_require = false;
          continue;
        }
        std::string_view body;
        if (line.rfind("require ", 0) == 0) body = trim(line.substr(8));
        else if (in_require) body = line;
        else continue;
        size_t space = body.find(' ');
        if (space == std::string_view::npos) continue;
        Package pkg;
        pkg.ecosystem = Ecosystem::golang;
        pkg.provenance = Provenance::declared;
        pkg.name = std::string(body.substr(0, space));
        pkg.version = std::string(trim(body.substr(space + 1)));
        pkg.metadata_files.push_back(path);
        packages.push_back(std::move(pkg));
      }
    } else if (base == "go.sum") {
      std::string content(store.read(entry));
      std::set<std::pair<std::string, std::string>> seen;
      for (std::string_view raw : split_lines(content)) {
        std::string_view line = trim(raw);
        size_t first = line.find(' ');
        if (first == std::string_view::npos) continue;
        size_t second = line.find(' ', first + 1);
        std::string name(line.substr(0, first));
        std::string version(line.substr(first + 1, (second == std::string_view::npos
                                                        ? line.size()
                                                        : second) - first - 1));
        if (version.size() > 7 && version.substr(version.size() - 7) == "/go.mod") {
          version.resize(version.size() - 7);
        }
        if (name.empty() || version.empty()) continue;
        if (!seen.insert({name, version}).second) continue;
        Package pkg;
        pkg.ecosystem = Ecosystem::golang;
        pkg.provenance = Provenance::declared;
        pkg.name = name;
        pkg.version = version;
        pkg.metadata_files.push_back(path);
        packages.push_back(std::move(pkg));
      }
    } else if ((entry.mode & 0111) != 0) {
      // executables: only Go binaries embed a readable dependency list
      std::vector<Package> found;
      const std::string digest = entry.content_digest.value_or("");
      if (cache != nullptr && !digest.empty()) {
        auto it = cache->by_digest.find(digest);
        if (it != cache->by_digest.end()) {
          found = it->second;
          for (Package& pkg : found) {
            pkg.metadata_files.assign(1, path);
            pkg.owned_files.assign(1, path);
          }
          packages.insert(packages.end(), found.begin(), found.end());
          continue;
        }
      }
      found = scan_go_binary(store.read(entry), path, warnings);
      if (cache != nullptr && !digest.empty()) cache->by_digest[digest] = found;
      packages.insert(packages.end(), found.begin(), found.end());
    }
  }
  return packages;
}

}  // namespace strata
