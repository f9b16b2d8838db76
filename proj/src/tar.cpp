#include "strata/tar.hpp"

#include <cstring>

#include "strata/error.hpp"

namespace strata {

namespace {

constexpr size_t kBlock = 512;

struct RawHeader {
  char name[100];
  char mode[8];
  char uid[8];
  char gid[8];
  char size[12];
  char mtime[12];
  char chksum[8];
  char typeflag;
  char linkname[100];
  char magic[6];
  char version[2];
  char uname[32];
  char gname[32];
  char devmajor[8];
  char devminor[8];
  char prefix[155];
  char pad[12];
};
static_assert(sizeof(RawHeader) == kBlock);

bool all_zero(const std::byte* p, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    if (p[i] != std::byte{0}) return false;
  }
  return true;
}

std::string field_str(const char* p, size_t n) {
  return std::string(p, strnlen(p, n));
}

// Octal ASCII, or GNU base-256 when the high bit of the first byte is set.
uint64_t field_num(const char* p, size_t n) {
  const auto* u = reinterpret_cast<const unsigned char*>(p);
  if (n > 0 && (u[0] & 0x80) != 0) {
    uint64_t v = u[0] & 0x7f;
    for (size_t i = 1; i < n; ++i) v = (v << 8) | u[i];
    return v;
  }
  uint64_t v = 0;
  for (size_t i = 0; i < n; ++i) {
    char c = p[i];
    if (c == '\0') break;
    if (c == ' ') continue;
    if (c < '0' || c > '7') break;
    v = v * 8 + static_cast<uint64_t>(c - '0');
  }
  return v;
}

bool checksum_ok(const RawHeader& h) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(&h);
  uint64_t unsigned_sum = 0;
  int64_t signed_sum = 0;  // some historic writers summed signed chars
  for (size_t i = 0; i < kBlock; ++i) {
    const bool in_chksum =
        i >= offsetof(RawHeader, chksum) && i < offsetof(RawHeader, chksum) + 8;
    unsigned_sum += in_chksum ? ' ' : bytes[i];
    signed_sum += in_chksum ? ' ' : static_cast<signed char>(bytes[i]);
  }
  uint64_t stored = field_num(h.chksum, sizeof(h.chksum));
  return stored == unsigned_sum || static_cast<int64_t>(stored) == signed_sum;
}

// Links, directories, and device nodes carry no data blocks regardless of
// what the size field says.
bool has_data(char typeflag) {
  switch (typeflag) {
    case '1': case '2': case '3': case '4': case '5': case '6':
      return false;
    default:
      return true;
  }
}

// pax records: "<len> <key>=<value>\n" repeated.
void apply_pax(std::string_view data, std::string* path, std::string* link, uint64_t* size,
               bool* size_set) {
  size_t pos = 0;
  while (pos < data.size()) {
    size_t sp = data.find(' ', pos);
    if (sp == std::string_view::npos) break;
    uint64_t reclen = 0;
    for (size_t i = pos; i < sp; ++i) {
      char c = data[i];
      if (c < '0' || c > '9') return;
      reclen = reclen * 10 + static_cast<uint64_t>(c - '0');
    }
    if (reclen == 0 || pos + reclen > data.size()) return;
    std::string_view rec = data.substr(sp + 1, pos + reclen - sp - 2);  // strip trailing \n
    size_t eq = rec.find('=');
    if (eq != std::string_view::npos) {
      std::string_view key = rec.substr(0, eq);
      std::string_view value = rec.substr(eq + 1);
      if (key == "path") *path = std::string(value);
      else if (key == "linkpath") *link = std::string(value);
      else if (key == "size") {
        uint64_t v = 0;
        for (char c : value) {
          if (c < '0' || c > '9') return;
          v = v * 10 + static_cast<uint64_t>(c - '0');
        }
        *size = v;
        *size_set = true;
      }
    }
    pos += reclen;
  }
}

}  // namespace

std::optional<TarMember> TarReader::next() {
  std::string long_name;
  std::string long_link;
  std::string pax_path;
  std::string pax_link;
  uint64_t pax_size = 0;
  bool pax_size_set = false;

  for (;;) {
    if (pos_ == archive_.size()) return std::nullopt;  // writer omitted end blocks
    if (pos_ + kBlock > archive_.size()) {
      throw Error(Errc::truncated_stream, "partial tar header at offset " + std::to_string(pos_));
    }
    const std::byte* block = archive_.data() + pos_;
    if (all_zero(block, kBlock)) {
      // end-of-archive marker; anything after it is padding
      return std::nullopt;
    }
    RawHeader h{};
    std::memcpy(&h, block, kBlock);
    if (!checksum_ok(h)) {
      throw Error(Errc::malformed_tar, "bad header checksum at offset " + std::to_string(pos_));
    }

    uint64_t size = field_num(h.size, sizeof(h.size));
    if (pax_size_set && h.typeflag != 'x' && h.typeflag != 'g' && h.typeflag != 'L' &&
        h.typeflag != 'K') {
      size = pax_size;
    }
    if (h.typeflag != 'x' && h.typeflag != 'g' && h.typeflag != 'L' && h.typeflag != 'K' &&
        !has_data(h.typeflag)) {
      size = 0;
    }
    const uint64_t data_offset = pos_ + kBlock;
    const uint64_t padded = (size + kBlock - 1) / kBlock * kBlock;
    if (data_offset + padded > archive_.size()) {
      throw Error(Errc::truncated_stream, "tar member exceeds archive size");
    }
    pos_ = data_offset + padded;

    const char type = h.typeflag;
    if (type == 'L' || type == 'K' || type == 'x' || type == 'g') {
      std::string data(reinterpret_cast<const char*>(archive_.data() + data_offset),
                       static_cast<size_t>(size));
      if (type == 'L') {
        long_name = data.substr(0, data.find('\0'));
      } else if (type == 'K') {
        long_link = data.substr(0, data.find('\0'));
      } else if (type == 'x') {
        apply_pax(data, &pax_path, &pax_link, &pax_size, &pax_size_set);
      }
      // 'g' global headers carry no per-member information we use
      continue;
    }

    TarMember m;
    m.typeflag = (type == '\0') ? '0' : type;
    m.size = size;
    m.data_offset = data_offset;
    m.mode = static_cast<uint32_t>(field_num(h.mode, sizeof(h.mode)));

    if (!pax_path.empty()) {
      m.path = pax_path;
    } else if (!long_name.empty()) {
      m.path = long_name;
    } else {
      m.path = field_str(h.name, sizeof(h.name));
      if (std::memcmp(h.magic, "ustar", 5) == 0 && h.prefix[0] != '\0') {
        std::string prefix = field_str(h.prefix, sizeof(h.prefix));
        m.path = prefix + "/" + m.path;
      }
    }

    if (!pax_link.empty()) {
      m.link_target = pax_link;
    } else if (!long_link.empty()) {
      m.link_target = long_link;
    } else {
      m.link_target = field_str(h.linkname, sizeof(h.linkname));
    }

    if (m.path.empty()) {
      throw Error(Errc::malformed_tar, "member with empty name at offset " +
                                           std::to_string(data_offset - kBlock));
    }
    return m;
  }
}

}  // namespace strata
