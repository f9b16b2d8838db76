#include <sqlite3.h>

#include <cstring>

#include "strata/analyzers.hpp"
#include "strata/io.hpp"

namespace strata {

namespace {

// rpm header binary layout (database form: no lead, no 8-byte preamble):
//   int32 il, int32 dl, il * { int32 tag, int32 type, int32 offset,
//   int32 count }, byte data[dl]; everything big-endian.
constexpr int kTagName = 1000;
constexpr int kTagVersion = 1001;
constexpr int kTagRelease = 1002;
constexpr int kTagEpoch = 1003;
constexpr int kTagArch = 1022;
constexpr int kTagDirIndexes = 1116;
constexpr int kTagBaseNames = 1117;
constexpr int kTagDirNames = 1118;

constexpr int kTypeInt32 = 4;
constexpr int kTypeString = 6;
constexpr int kTypeStringArray = 8;
constexpr int kTypeI18nString = 9;

uint32_t read_be32(const std::byte* p) {
  return (uint32_t(uint8_t(p[0])) << 24) | (uint32_t(uint8_t(p[1])) << 16) |
         (uint32_t(uint8_t(p[2])) << 8) | uint32_t(uint8_t(p[3]));
}

struct IndexEntry {
  int32_t tag;
  int32_t type;
  uint32_t offset;
  uint32_t count;
};

struct HeaderBlob {
  std::vector<IndexEntry> entries;
  std::span<const std::byte> data;

  const IndexEntry* find(int tag) const {
    for (const IndexEntry& e : entries) {
      if (e.tag == tag) return &e;
    }
    return nullptr;
  }

  std::optional<std::string> get_string(int tag) const {
    const IndexEntry* e = find(tag);
    if (e == nullptr || (e->type != kTypeString && e->type != kTypeI18nString)) {
      return std::nullopt;
    }
    if (e->offset >= data.size()) return std::nullopt;
    const char* start = reinterpret_cast<const char*>(data.data() + e->offset);
    size_t max = data.size() - e->offset;
    return std::string(start, strnlen(start, max));
  }

  std::vector<std::string> get_string_array(int tag) const {
    std::vector<std::string> out;
    const IndexEntry* e = find(tag);
    if (e == nullptr || e->type != kTypeStringArray || e->offset >= data.size()) return out;
    size_t pos = e->offset;
    for (uint32_t i = 0; i < e->count && pos < data.size(); ++i) {
      const char* start = reinterpret_cast<const char*>(data.data() + pos);
      size_t len = strnlen(start, data.size() - pos);
      out.emplace_back(start, len);
      pos += len + 1;
    }
    return out;
  }

  std::vector<uint32_t> get_int32_array(int tag) const {
    std::vector<uint32_t> out;
    const IndexEntry* e = find(tag);
    if (e == nullptr || e->type != kTypeInt32) return out;
    for (uint32_t i = 0; i < e->count; ++i) {
      size_t pos = e->offset + size_t{4} * i;
      if (pos + 4 > data.size()) break;
      out.push_back(read_be32(data.data() + pos));
    }
    return out;
  }
};

std::optional<HeaderBlob> load_header(std::span<const std::byte> blob) {
  if (blob.size() < 8) return std::nullopt;
  uint32_t il = read_be32(blob.data());
  uint32_t dl = read_be32(blob.data() + 4);
  if (il > 0x10000 || dl > 0x10000000) return std::nullopt;
  size_t need = 8 + size_t{16} * il + dl;
  if (blob.size() < need) return std::nullopt;

  HeaderBlob header;
  header.entries.reserve(il);
  for (uint32_t i = 0; i < il; ++i) {
    const std::byte* p = blob.data() + 8 + size_t{16} * i;
    IndexEntry e;
    e.tag = static_cast<int32_t>(read_be32(p));
    e.type = static_cast<int32_t>(read_be32(p + 4));
    e.offset = read_be32(p + 8);
    e.count = read_be32(p + 12);
    header.entries.push_back(e);
  }
  header.data = blob.subspan(8 + size_t{16} * il, dl);
  return header;
}

bool looks_like_berkeley_db(std::span<const std::byte> bytes) {
  if (bytes.size() < 16) return false;
  uint32_t magic_be = read_be32(bytes.data() + 12);
  uint32_t magic_le = (uint32_t(uint8_t(bytes[15])) << 24) | (uint32_t(uint8_t(bytes[14])) << 16) |
                      (uint32_t(uint8_t(bytes[13])) << 8) | uint32_t(uint8_t(bytes[12]));
  for (uint32_t magic : {magic_be, magic_le}) {
    if (magic == 0x00061561 || magic == 0x00053162 || magic == 0x00042253) return true;
  }
  return false;
}

bool looks_like_sqlite(std::span<const std::byte> bytes) {
  static constexpr char kMagic[] = "SQLite format 3";
  return bytes.size() > 16 && std::memcmp(bytes.data(), kMagic, 15) == 0;
}

}  // namespace

std::optional<Package> parse_rpm_header_blob(std::span<const std::byte> blob,
                                             std::vector<AnalyzerWarning>* warnings) {
  auto header = load_header(blob);
  if (!header) {
    if (warnings != nullptr) warnings->push_back({"rpm", "undecodable header blob skipped"});
    return std::nullopt;
  }
  auto name = header->get_string(kTagName);
  if (!name || name->empty()) {
    if (warnings != nullptr) warnings->push_back({"rpm", "header blob without NAME skipped"});
    return std::nullopt;
  }

  Package pkg;
  pkg.ecosystem = Ecosystem::rpm;
  pkg.name = *name;
  auto version = header->get_string(kTagVersion);
  auto release = header->get_string(kTagRelease);
  if (version) {
    std::string v = *version;
    if (release && !release->empty()) v += "-" + *release;
    pkg.version = v;
  } else {
    pkg.degraded = true;
  }

  std::vector<std::string> dirs = header->get_string_array(kTagDirNames);
  std::vector<std::string> bases = header->get_string_array(kTagBaseNames);
  std::vector<uint32_t> indexes = header->get_int32_array(kTagDirIndexes);
  if (bases.size() == indexes.size()) {
    for (size_t i = 0; i < bases.size(); ++i) {
      if (indexes[i] < dirs.size()) {
        pkg.owned_files.push_back(dirs[indexes[i]] + bases[i]);
      }
    }
  }
  return pkg;
}

std::vector<Package> parse_rpm_db(std::span<const std::byte> db_bytes,
                                  std::vector<AnalyzerWarning>* warnings) {
  std::vector<Package> packages;
  if (looks_like_berkeley_db(db_bytes)) {
    if (warnings != nullptr) {
      warnings->push_back(
          {"rpm", "unsupported-db-format: BerkeleyDB rpm database found; its packages are "
                  "present but unparsed"});
    }
    return packages;
  }
  if (!looks_like_sqlite(db_bytes)) {
    if (warnings != nullptr) {
      warnings->push_back({"rpm", "unsupported-db-format: not an rpmdb.sqlite database"});
    }
    return packages;
  }

  sqlite3* db = nullptr;
  if (sqlite3_open(":memory:", &db) != SQLITE_OK) {
    if (warnings != nullptr) warnings->push_back({"rpm", "sqlite open failed"});
    if (db != nullptr) sqlite3_close(db);
    return packages;
  }

  // deserialize wants a buffer it may keep; hand it a private copy
  void* buf = sqlite3_malloc64(db_bytes.size());
  bool ready = false;
  if (buf != nullptr) {
    std::memcpy(buf, db_bytes.data(), db_bytes.size());
    ready = sqlite3_deserialize(db, "main", static_cast<unsigned char*>(buf), db_bytes.size(),
                                db_bytes.size(),
                                SQLITE_DESERIALIZE_READONLY | SQLITE_DESERIALIZE_FREEONCLOSE) ==
            SQLITE_OK;
  }

  TempDir spool_dir("strata-rpm");
  if (!ready) {
    // older sqlite without deserialize support: spool to disk
    sqlite3_close(db);
    db = nullptr;
    auto path = spool_dir.path() / "rpmdb.sqlite";
    write_file(path, std::string_view(reinterpret_cast<const char*>(db_bytes.data()),
                                      db_bytes.size()));
    if (sqlite3_open_v2(path.c_str(), &db, SQLITE_OPEN_READONLY, nullptr) != SQLITE_OK) {
      if (warnings != nullptr) warnings->push_back({"rpm", "sqlite open failed"});
      if (db != nullptr) sqlite3_close(db);
      return packages;
    }
  }

  sqlite3_stmt* stmt = nullptr;
  if (sqlite3_prepare_v2(db, "SELECT blob FROM Packages ORDER BY hnum", -1, &stmt, nullptr) !=
      SQLITE_OK) {
    if (warnings != nullptr) {
      warnings->push_back({"rpm", std::string("no Packages table: ") + sqlite3_errmsg(db)});
    }
    sqlite3_close(db);
    return packages;
  }
  while (sqlite3_step(stmt) == SQLITE_ROW) {
    const void* blob = sqlite3_column_blob(stmt, 0);
    int size = sqlite3_column_bytes(stmt, 0);
    if (blob == nullptr || size <= 0) continue;
    auto pkg = parse_rpm_header_blob(
        std::span<const std::byte>(static_cast<const std::byte*>(blob), size), warnings);
    if (pkg) {
      pkg->metadata_files.push_back("/var/lib/rpm/rpmdb.sqlite");
      packages.push_back(std::move(*pkg));
    }
  }
  sqlite3_finalize(stmt);
  sqlite3_close(db);
  return packages;
}

}  // namespace strata
