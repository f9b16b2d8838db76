#include <catch2/catch_amalgamated.hpp>

#include "strata/digest.hpp"
#include "strata/paths.hpp"

using namespace strata;

TEST_CASE("tar path normalization") {
  CHECK(normalize_tar_path("./etc/os-release") == "/etc/os-release");
  CHECK(normalize_tar_path("usr/") == "/usr");
  CHECK(normalize_tar_path("/already/abs") == "/already/abs");
  CHECK(normalize_tar_path("a//b/./c") == "/a/b/c");
  CHECK(normalize_tar_path("a/b/../c") == "/a/c");
  CHECK(normalize_tar_path("./") == "/");
  CHECK_FALSE(normalize_tar_path("../escape").has_value());
  CHECK_FALSE(normalize_tar_path("a/../../escape").has_value());
}

TEST_CASE("path helpers") {
  CHECK(basename_of("/etc/os-release") == "os-release");
  CHECK(parent_of("/etc/os-release") == "/etc");
  CHECK(parent_of("/etc") == "/");
  CHECK(is_under("/app", "/app/x"));
  CHECK(is_under("/", "/app"));
  CHECK_FALSE(is_under("/app", "/app"));
  CHECK_FALSE(is_under("/app", "/apple/x"));
}

TEST_CASE("whiteout names") {
  CHECK(is_whiteout_name(".wh.os-release"));
  CHECK_FALSE(is_whiteout_name(".wh..wh..opq"));
  CHECK(is_opaque_whiteout_name(".wh..wh..opq"));
  CHECK_FALSE(is_whiteout_name("regular"));
  CHECK(whiteout_target("/etc/.wh.os-release") == "/etc/os-release");
  CHECK(whiteout_target("/.wh.top") == "/top");
}

TEST_CASE("sha256") {
  // FIPS 180-2 test vector
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");

  Sha256 streaming;
  streaming.update(std::string_view("ab"));
  streaming.update(std::string_view("c"));
  CHECK(streaming.finish_hex() == sha256_hex("abc"));
}

TEST_CASE("digest parsing") {
  std::string hex(64, 'a');
  CHECK(parse_sha256_digest("sha256:" + hex) == hex);
  CHECK(parse_sha256_digest(hex) == hex);
  CHECK(parse_sha256_digest("sha256:XYZ").empty());
  CHECK(parse_sha256_digest("sha256:" + hex.substr(1)).empty());
  CHECK(is_sha256_hex(hex));
  CHECK_FALSE(is_sha256_hex(hex.substr(0, 63)));
}
