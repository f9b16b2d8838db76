#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace strata {

struct TarMember {
  std::string path;         // as recorded, after longname/pax resolution
  std::string link_target;  // for hardlinks and symlinks
  char typeflag = '0';
  uint32_t mode = 0;
  uint64_t size = 0;
  uint64_t data_offset = 0;  // offset of the content within the archive
};

/// Sequential reader over an in-memory (usually mmapped) tar stream.
/// Handles ustar, GNU long name/link extensions, and pax path/linkpath/size
/// overrides. Throws Error(malformed_tar) / Error(truncated_stream).
class TarReader {
 public:
  explicit TarReader(std::span<const std::byte> archive) : archive_(archive) {}

  std::optional<TarMember> next();

  std::span<const std::byte> content(const TarMember& m) const {
    return archive_.subspan(m.data_offset, m.size);
  }

 private:
  std::span<const std::byte> archive_;
  uint64_t pos_ = 0;
};

}  // namespace strata
