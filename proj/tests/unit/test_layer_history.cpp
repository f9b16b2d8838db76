#include <catch2/catch_amalgamated.hpp>

#include "strata/error.hpp"
#include "strata/layer_history.hpp"
#include "test_support.hpp"

using namespace strata;
using test::TarWriter;

namespace {

std::span<const std::byte> as_span(const std::string& s) {
  return std::as_bytes(std::span<const char>(s.data(), s.size()));
}

std::set<std::string> squashed_paths(const SquashedView& view) {
  std::set<std::string> out;
  for (const auto& [path, entry] : view.files) out.insert(path);
  return out;
}

const std::vector<FileEvent>& events_for(const FileHistory& history, const std::string& path) {
  static const std::vector<FileEvent> kEmpty;
  auto it = history.paths.find(path);
  return it == history.paths.end() ? kEmpty : it->second;
}

}  // namespace

TEST_CASE("extract_entries normalizes and classifies") {
  std::string tar = TarWriter()
                        .file("./etc/os-release", "ID=debian\n")
                        .dir("usr/")
                        .file("etc/.wh.os-release", "")
                        .file("app/.wh..wh..opq", "")
                        .finish();
  LayerDelta delta = extract_entries(as_span(tar), 0);
  REQUIRE(delta.entries.size() == 4);
  CHECK(delta.entries[0].path == "/etc/os-release");
  CHECK(delta.entries[0].kind == FileKind::regular);
  REQUIRE(delta.entries[0].content_digest.has_value());
  CHECK(delta.entries[1].path == "/usr");
  CHECK(delta.entries[1].kind == FileKind::directory);
  CHECK(delta.entries[2].path == "/etc/.wh.os-release");
  CHECK(delta.entries[2].kind == FileKind::whiteout);
  CHECK(delta.entries[3].kind == FileKind::opaque_whiteout);

  SECTION("path escape is rejected") {
    std::string evil = TarWriter().file("../../etc/passwd", "x").finish();
    try {
      extract_entries(as_span(evil), 0);
      FAIL("expected path-escape");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::path_escape);
    }
  }
}

TEST_CASE("intra-layer hardlinks resolve to the target digest") {
  std::string tar =
      TarWriter().file("bin/tool", "#!payload").hardlink("bin/alias", "bin/tool").finish();
  LayerDelta delta = extract_entries(as_span(tar), 0);
  REQUIRE(delta.entries.size() == 2);
  CHECK(delta.entries[1].kind == FileKind::hardlink);
  CHECK(delta.entries[1].content_digest == delta.entries[0].content_digest);
}

TEST_CASE("history: re-appearing file is Modified with both digests") {
  std::vector<std::string> tars = {
      TarWriter().file("a", "v1").finish(),
      TarWriter().file("a", "v2").finish(),
  };
  FileHistory history = build_history(test::deltas_from_tars(tars));
  const auto& events = events_for(history, "/a");
  REQUIRE(events.size() == 2);
  CHECK(events[0].action == FileAction::added);
  CHECK(events[0].layer_index == 0);
  CHECK(events[1].action == FileAction::modified);
  CHECK(events[1].layer_index == 1);
  REQUIRE(events[1].prior_digest.has_value());
  CHECK(*events[1].prior_digest != *events[1].entry.content_digest);
}

TEST_CASE("history: whiteout deletes") {
  std::vector<std::string> tars = {
      TarWriter().file("etc/os-release", "ID=debian\n").finish(),
      TarWriter().file("other", "x").finish(),
      TarWriter().whiteout("/etc/os-release").finish(),
  };
  FileHistory history = build_history(test::deltas_from_tars(tars));
  const auto& events = events_for(history, "/etc/os-release");
  REQUIRE(events.size() == 2);
  CHECK(events[0].action == FileAction::added);
  CHECK(events[1].action == FileAction::deleted);
  CHECK(events[1].layer_index == 2);

  SquashedView view = squash(history);
  CHECK(view.find("/etc/os-release") == nullptr);
  CHECK(view.find("/other") != nullptr);
}

TEST_CASE("history: opaque whiteout deletes the subtree, re-adds are Added") {
  std::vector<std::string> tars = {
      TarWriter().dir("app").file("app/x", "1").file("app/y", "2").finish(),
      TarWriter().opaque("/app").file("app/z", "3").finish(),
  };
  FileHistory history = build_history(test::deltas_from_tars(tars));
  CHECK(events_for(history, "/app/x").back().action == FileAction::deleted);
  CHECK(events_for(history, "/app/y").back().action == FileAction::deleted);
  const auto& z = events_for(history, "/app/z");
  REQUIRE(z.size() == 1);
  CHECK(z[0].action == FileAction::added);
  CHECK(z[0].layer_index == 1);

  SquashedView view = squash(history);
  CHECK(squashed_paths(view) == std::set<std::string>{"/app", "/app/z"});
}

TEST_CASE("history: whiteout for a nonexistent path is a recorded no-op") {
  std::vector<std::string> tars = {
      TarWriter().file("a", "1").finish(),
      TarWriter().whiteout("/ghost").finish(),
  };
  FileHistory history = build_history(test::deltas_from_tars(tars));
  CHECK(history.paths.count("/ghost") == 0);
  REQUIRE(history.noop_whiteouts.size() == 1);
  CHECK(history.noop_whiteouts[0] == std::make_pair(size_t{1}, std::string("/ghost")));
}

TEST_CASE("history: directory rewrites do not generate Modified") {
  std::vector<std::string> tars = {
      TarWriter().dir("usr").file("usr/f", "1").finish(),
      TarWriter().dir("usr").file("usr/g", "2").finish(),
  };
  FileHistory history = build_history(test::deltas_from_tars(tars));
  const auto& events = events_for(history, "/usr");
  REQUIRE(events.size() == 1);
  CHECK(events[0].action == FileAction::added);
}

TEST_CASE("squash: deleted-then-recreated path carries the newest snapshot") {
  std::vector<std::string> tars = {
      TarWriter().file("a", "first").finish(),
      TarWriter().whiteout("/a").finish(),
      TarWriter().file("a", "third").finish(),
  };
  FileHistory history = build_history(test::deltas_from_tars(tars));
  const auto& events = events_for(history, "/a");
  REQUIRE(events.size() == 3);
  CHECK(events[2].action == FileAction::added);  // re-creation after deletion

  SquashedView view = squash(history);
  const FileEntry* entry = view.find("/a");
  REQUIRE(entry != nullptr);
  CHECK(entry->layer_index == 2);

  SECTION("empty history squashes to an empty view") {
    CHECK(squash(FileHistory{}).files.empty());
  }
}

TEST_CASE("squash: 100 files with 7 whiteouts leaves 93 alive") {
  TarWriter layer0;
  for (int i = 0; i < 60; ++i) layer0.file("d0/f" + std::to_string(i), "x");
  TarWriter layer1;
  for (int i = 0; i < 40; ++i) layer1.file("d1/f" + std::to_string(i), "y");
  TarWriter layer2;
  for (int i = 0; i < 4; ++i) layer2.whiteout("/d0/f" + std::to_string(i));
  for (int i = 0; i < 3; ++i) layer2.whiteout("/d1/f" + std::to_string(i));

  std::vector<std::string> tars = {layer0.finish(), layer1.finish(), layer2.finish()};
  auto deltas = test::deltas_from_tars(tars);
  FileHistory history = build_history(deltas);
  SquashedView view = squash(history);
  CHECK(view.files.size() == 93);
  CHECK(squashed_paths(view) == test::replay_alive_paths(deltas));
}

TEST_CASE("property: squash equals the sequential replay oracle") {
  std::mt19937 rng(20260809);
  for (int round = 0; round < 50; ++round) {
    std::vector<std::string> tars = test::random_layer_tars(rng);
    auto deltas = test::deltas_from_tars(tars);
    FileHistory history = build_history(deltas);
    std::set<std::string> ours = squashed_paths(squash(history));
    std::set<std::string> oracle = test::replay_alive_paths(deltas);
    if (ours != oracle) {
      CAPTURE(round);
      REQUIRE(ours == oracle);
    }
  }
  SUCCEED();
}

TEST_CASE("property: every path history starts with Added, Deleted never first") {
  std::mt19937 rng(424242);
  for (int round = 0; round < 30; ++round) {
    auto deltas = test::deltas_from_tars(test::random_layer_tars(rng));
    FileHistory history = build_history(deltas);
    for (const auto& [path, events] : history.paths) {
      REQUIRE(!events.empty());
      CHECK(events.front().action == FileAction::added);
      for (size_t i = 1; i < events.size(); ++i) {
        CHECK(events[i - 1].layer_index <= events[i].layer_index);
        if (events[i].action == FileAction::modified) {
          // Modified requires a live predecessor
          CHECK(events[i - 1].action != FileAction::deleted);
        }
      }
    }
  }
  SUCCEED();
}

TEST_CASE("history building is order-sensitive") {
  std::vector<std::string> tars = {
      TarWriter().file("a", "v1").finish(),
      TarWriter().whiteout("/a").finish(),
  };
  auto deltas = test::deltas_from_tars(tars);
  SquashedView in_order = squash(build_history(deltas));
  CHECK(in_order.find("/a") == nullptr);

  std::swap(deltas[0], deltas[1]);
  deltas[0].layer_index = 0;
  deltas[1].layer_index = 1;
  SquashedView permuted = squash(build_history(deltas));
  CHECK(permuted.find("/a") != nullptr);  // whiteout before the add is a no-op
}

TEST_CASE("squash_prefix sees only earlier layers") {
  std::vector<std::string> tars = {
      TarWriter().file("a", "1").finish(),
      TarWriter().whiteout("/a").file("b", "2").finish(),
  };
  FileHistory history = build_history(test::deltas_from_tars(tars));
  SquashedView first = squash_prefix(history, 1);
  CHECK(first.find("/a") != nullptr);
  CHECK(first.find("/b") == nullptr);
  SquashedView all = squash_prefix(history, 2);
  CHECK(all.find("/a") == nullptr);
  CHECK(all.find("/b") != nullptr);
}
