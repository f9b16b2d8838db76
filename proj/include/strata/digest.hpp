#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>

namespace strata {

/// Incremental sha256, hex-encoded on finish.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(Sha256&&) noexcept;
  Sha256& operator=(Sha256&&) noexcept;
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::span<const std::byte> data);
  void update(std::string_view data);

  /// Finalizes and returns the 64-char lowercase hex digest. The object
  /// must not be updated afterwards.
  std::string finish_hex();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view data);
std::string sha256_hex_of_file(const std::string& path);

bool is_sha256_hex(std::string_view s);

/// Accepts "sha256:<hex>" or bare hex; returns lowercase hex or empty if invalid.
std::string parse_sha256_digest(std::string_view s);

}  // namespace strata
