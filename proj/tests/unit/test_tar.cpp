#include <cstring>

#include <catch2/catch_amalgamated.hpp>

#include "strata/error.hpp"
#include "strata/tar.hpp"
#include "test_support.hpp"

using namespace strata;
using strata::test::TarWriter;

namespace {

std::span<const std::byte> as_span(const std::string& s) {
  return std::as_bytes(std::span<const char>(s.data(), s.size()));
}

std::vector<TarMember> read_all(const std::string& tar) {
  TarReader reader(as_span(tar));
  std::vector<TarMember> members;
  while (auto m = reader.next()) members.push_back(*m);
  return members;
}

}  // namespace

TEST_CASE("tar reader roundtrip of writer output") {
  std::string tar = TarWriter()
                        .dir("etc")
                        .file("etc/os-release", "ID=debian\n")
                        .symlink("etc/alias", "os-release")
                        .hardlink("etc/hard", "/etc/os-release")
                        .finish();
  auto members = read_all(tar);
  REQUIRE(members.size() == 4);
  CHECK(members[0].path == "etc/");
  CHECK(members[0].typeflag == '5');
  CHECK(members[1].path == "etc/os-release");
  CHECK(members[1].size == 10);
  CHECK(members[2].typeflag == '2');
  CHECK(members[2].link_target == "os-release");
  CHECK(members[3].typeflag == '1');
  CHECK(members[3].link_target == "etc/os-release");

  TarReader reader(as_span(tar));
  reader.next();
  auto file_member = reader.next();
  REQUIRE(file_member.has_value());
  auto content = reader.content(*file_member);
  CHECK(std::string(reinterpret_cast<const char*>(content.data()), content.size()) ==
        "ID=debian\n");
}

TEST_CASE("tar reader handles GNU long names") {
  std::string long_path = "deep";
  for (int i = 0; i < 30; ++i) long_path += "/segment-" + std::to_string(i);
  REQUIRE(long_path.size() > 100);

  std::string tar = TarWriter().file(long_path, "x").finish();
  auto members = read_all(tar);
  REQUIRE(members.size() == 1);
  CHECK(members[0].path == long_path);
  CHECK(members[0].size == 1);
}

TEST_CASE("tar reader rejects corruption") {
  SECTION("truncated header") {
    std::string tar = TarWriter().file("a", "hello").finish();
    tar.resize(100);
    TarReader reader(as_span(tar));
    CHECK_THROWS_AS(reader.next(), Error);
  }
  SECTION("bad checksum") {
    std::string tar = TarWriter().file("a", "hello").finish();
    tar[0] ^= 0x7f;
    TarReader reader(as_span(tar));
    try {
      reader.next();
      FAIL("expected malformed-tar");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::malformed_tar);
    }
  }
  SECTION("member data past archive end") {
    std::string tar = TarWriter().file("a", std::string(2000, 'x')).finish();
    tar.resize(1024);  // header promises 2000 bytes
    TarReader reader(as_span(tar));
    try {
      reader.next();
      FAIL("expected truncated-stream");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::truncated_stream);
    }
  }
}

TEST_CASE("tar reader accepts archive without end blocks") {
  std::string tar = TarWriter().file("a", "x").finish();
  tar.resize(tar.size() - 1024);
  TarReader reader(as_span(tar));
  CHECK(reader.next().has_value());
  CHECK_FALSE(reader.next().has_value());
}

TEST_CASE("pax path override wins") {
  // build a normal member, then rewrite its header into a pax 'x' record
  std::string pax_record = "31 path=override/long/file.txt\n";
  REQUIRE(pax_record.size() == 31);

  std::string pax_member = TarWriter().file("pax-holder", pax_record).finish();
  pax_member.resize(pax_member.size() - 1024);  // drop end blocks
  pax_member[156] = 'x';
  // recompute the checksum: 6 octal digits, NUL, space
  std::memset(&pax_member[148], ' ', 8);
  uint64_t sum = 0;
  for (size_t i = 0; i < 512; ++i) sum += static_cast<unsigned char>(pax_member[i]);
  for (size_t i = 6; i-- > 0;) {
    pax_member[148 + i] = static_cast<char>('0' + (sum & 7));
    sum >>= 3;
  }
  pax_member[154] = '\0';
  pax_member[155] = ' ';

  std::string tar = pax_member + TarWriter().file("real/name", "content").finish();

  auto members = read_all(tar);
  REQUIRE(members.size() == 1);
  CHECK(members[0].path == "override/long/file.txt");
  CHECK(members[0].size == 7);
}
