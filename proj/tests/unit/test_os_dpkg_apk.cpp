#include <algorithm>

#include <catch2/catch_amalgamated.hpp>

#include "strata/analyzers.hpp"
#include "test_support.hpp"

using namespace strata;
using test::MemoryWorld;
using test::TarWriter;

TEST_CASE("detect_os prefers /etc/os-release") {
  MemoryWorld world(TarWriter()
                        .file("etc/os-release", "ID=debian\nVERSION_ID=\"11\"\n")
                        .file("etc/debian_version", "11.3\n")
                        .finish());
  auto os = detect_os(world.view, world.store);
  REQUIRE(os.has_value());
  CHECK(os->os_id == "debian");
  CHECK(os->version_id == "11");
  CHECK(os->source_path == "/etc/os-release");
}

TEST_CASE("detect_os fallbacks") {
  SECTION("empty view yields none") {
    MemoryWorld world(TarWriter().file("unrelated", "x").finish());
    CHECK_FALSE(detect_os(world.view, world.store).has_value());
  }
  SECTION("debian_version alone") {
    MemoryWorld world(TarWriter().file("etc/debian_version", "11.3\n").finish());
    auto os = detect_os(world.view, world.store);
    REQUIRE(os.has_value());
    CHECK(os->os_id == "debian");
    CHECK(os->version_id == "11.3");
  }
  SECTION("centos-release style") {
    MemoryWorld world(
        TarWriter().file("etc/centos-release", "CentOS Linux release 7.9.2009 (Core)\n").finish());
    auto os = detect_os(world.view, world.store);
    REQUIRE(os.has_value());
    CHECK(os->os_id == "centos");
    CHECK(os->version_id == "7.9.2009");
  }
  SECTION("usr/lib/os-release when etc is empty") {
    MemoryWorld world(TarWriter().file("usr/lib/os-release", "ID=alpine\n").finish());
    auto os = detect_os(world.view, world.store);
    REQUIRE(os.has_value());
    CHECK(os->os_id == "alpine");
  }
}

namespace {

constexpr const char* kStatus =
    "Package: curl\n"
    "Status: install ok installed\n"
    "Architecture: amd64\n"
    "Version: 7.88.1-10\n"
    "Description: command line tool\n"
    " multi-line continuation\n"
    "\n"
    "Package: removed-tool\n"
    "Status: deinstall ok config-files\n"
    "Version: 1.0\n"
    "\n"
    "Package: libc6\n"
    "Status: install ok installed\n"
    "Version: 2.36-9\n";

}  // namespace

TEST_CASE("dpkg status parsing") {
  MemoryWorld world(TarWriter()
                        .file("var/lib/dpkg/status", kStatus)
                        .file("var/lib/dpkg/info/curl:amd64.list",
                              "/.\n/usr\n/usr/bin\n/usr/bin/curl\n/usr/share/doc/curl\n")
                        .file("usr/bin/curl", "binary")
                        .finish());

  std::vector<AnalyzerWarning> warnings;
  auto packages = parse_dpkg_status(kStatus, world.view, world.store, &warnings);
  REQUIRE(packages.size() == 2);

  CHECK(packages[0].ecosystem == Ecosystem::deb);
  CHECK(packages[0].name == "curl");
  CHECK(packages[0].version == "7.88.1-10");
  // the arch-qualified .list was found and read
  REQUIRE(packages[0].owned_files.size() >= 2);
  CHECK(std::find(packages[0].owned_files.begin(), packages[0].owned_files.end(),
                  "/usr/bin/curl") != packages[0].owned_files.end());
  CHECK(std::find(packages[0].metadata_files.begin(), packages[0].metadata_files.end(),
                  "/var/lib/dpkg/info/curl:amd64.list") != packages[0].metadata_files.end());

  CHECK(packages[1].name == "libc6");

  SECTION("deinstall residue is excluded") {
    for (const auto& pkg : packages) CHECK(pkg.name != "removed-tool");
  }
  SECTION("empty content parses to nothing") {
    CHECK(parse_dpkg_status("", world.view, world.store, nullptr).empty());
  }
  SECTION("malformed stanzas warn but do not abort") {
    std::vector<AnalyzerWarning> w;
    auto pkgs = parse_dpkg_status("garbage line without colon\n\nPackage: ok\n"
                                  "Status: install ok installed\nVersion: 1\n",
                                  world.view, world.store, &w);
    REQUIRE(pkgs.size() == 1);
    CHECK(pkgs[0].name == "ok");
    CHECK_FALSE(w.empty());
  }
}

TEST_CASE("apk installed database parsing") {
  std::string db =
      "P:musl\n"
      "V:1.2.4-r1\n"
      "A:x86_64\n"
      "F:lib\n"
      "R:libc.musl-x86_64.so.1\n"
      "R:ld-musl-x86_64.so.1\n"
      "\n"
      "P:busybox\n"
      "V:1.36.1-r0\n"
      "F:bin\n"
      "R:busybox\n";

  std::vector<AnalyzerWarning> warnings;
  auto packages = parse_apk_installed(db, &warnings);
  REQUIRE(packages.size() == 2);
  CHECK(packages[0].ecosystem == Ecosystem::apk);
  CHECK(packages[0].name == "musl");
  CHECK(packages[0].version == "1.2.4-r1");
  REQUIRE(packages[0].owned_files.size() == 2);
  CHECK(packages[0].owned_files[0] == "/lib/libc.musl-x86_64.so.1");
  CHECK(packages[1].name == "busybox");
  CHECK(packages[1].owned_files == std::vector<std::string>{"/bin/busybox"});
  CHECK(warnings.empty());

  SECTION("missing version is flagged, not dropped") {
    std::vector<AnalyzerWarning> w;
    auto degraded = parse_apk_installed("P:odd\nF:tmp\nR:x\n", &w);
    REQUIRE(degraded.size() == 1);
    CHECK_FALSE(degraded[0].version.has_value());
    CHECK(degraded[0].degraded);
    CHECK_FALSE(w.empty());
  }
  SECTION("empty content parses to nothing") {
    CHECK(parse_apk_installed("", nullptr).empty());
  }
}

TEST_CASE("dpkg parser roundtrip on re-serialized fixtures") {
  MemoryWorld world(TarWriter().file("x", "x").finish());
  auto first = parse_dpkg_status(kStatus, world.view, world.store, nullptr);

  // serialize what we parsed and parse again: same packages
  std::string serialized;
  for (const auto& pkg : first) {
    serialized += "Package: " + pkg.name + "\n";
    serialized += "Status: install ok installed\n";
    serialized += "Version: " + pkg.version.value_or("") + "\n\n";
  }
  auto second = parse_dpkg_status(serialized, world.view, world.store, nullptr);
  REQUIRE(second.size() == first.size());
  for (size_t i = 0; i < first.size(); ++i) {
    CHECK(second[i].name == first[i].name);
    CHECK(second[i].version == first[i].version);
  }
}
