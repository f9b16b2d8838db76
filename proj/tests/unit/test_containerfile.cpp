#include <catch2/catch_amalgamated.hpp>

#include "strata/containerfile.hpp"

using namespace strata;

namespace {

ImageConfig config_with(std::vector<HistoryEntry> history) {
  ImageConfig config;
  config.history = std::move(history);
  return config;
}

}  // namespace

TEST_CASE("reconstruct strips shell prefixes and classifies verbs") {
  auto instrs = reconstruct(config_with({
      {"/bin/sh -c #(nop) ENV A=1", true},
      {"/bin/sh -c apt-get update", false},
      {"RUN /bin/sh -c wget https://x/y.tar.gz # buildkit", false},
      {"ENV PATH=/usr/bin", true},
      {"COPY dir1 /app # buildkit", false},
      {"mystery entry format", true},
  }));
  REQUIRE(instrs.size() == 6);

  CHECK(instrs[0].verb == Verb::ENV);
  CHECK(instrs[0].args == "A=1");
  CHECK_FALSE(instrs[0].layer_index.has_value());

  CHECK(instrs[1].verb == Verb::RUN);
  CHECK(instrs[1].args == "apt-get update");
  CHECK(instrs[1].layer_index == 0);

  CHECK(instrs[2].verb == Verb::RUN);
  CHECK(instrs[2].args == "wget https://x/y.tar.gz");
  CHECK(instrs[2].layer_index == 1);

  CHECK(instrs[3].verb == Verb::ENV);
  CHECK(instrs[4].verb == Verb::COPY);
  CHECK(instrs[4].layer_index == 2);

  CHECK(instrs[5].verb == Verb::other);
  CHECK(instrs[5].raw_text == "mystery entry format");

  SECTION("reconstruction is lossless: raw texts reproduce created_by") {
    std::vector<std::string> raw;
    for (const auto& i : instrs) raw.push_back(i.raw_text);
    CHECK(raw == std::vector<std::string>{
                     "/bin/sh -c #(nop) ENV A=1", "/bin/sh -c apt-get update",
                     "RUN /bin/sh -c wget https://x/y.tar.gz # buildkit", "ENV PATH=/usr/bin",
                     "COPY dir1 /app # buildkit", "mystery entry format"});
  }
}

TEST_CASE("interpolation") {
  EnvContext ctx;
  ctx.assign("V", "1.2.3");

  ReconstructedInstruction instr;
  instr.args = "wget https://h/app-$V.tgz";
  CHECK(interpolate(instr, ctx) == "wget https://h/app-1.2.3.tgz");

  instr.args = "wget https://h/app-${V}.tgz";
  CHECK(interpolate(instr, ctx) == "wget https://h/app-1.2.3.tgz");

  SECTION("undefined variables stay verbatim and get reported") {
    ReconstructedInstruction unset;
    unset.args = "echo $UNSET";
    EnvContext empty;
    CHECK(interpolate(unset, empty) == "echo $UNSET");
    CHECK(empty.unresolved == std::vector<std::string>{"UNSET"});
  }

  SECTION("sequential shadowing: B=$A resolves through the context") {
    auto instrs = reconstruct(config_with({
        {"/bin/sh -c #(nop) ENV A=x", true},
        {"/bin/sh -c #(nop) ENV B=$A", true},
        {"/bin/sh -c echo $B", false},
    }));
    EnvContext env;
    auto expanded = interpolate_all(instrs, env);
    CHECK(env.values.at("B") == "x");
    CHECK(expanded[2].args == "echo x");
  }

  SECTION("later assignments shadow earlier ones") {
    auto instrs = reconstruct(config_with({
        {"/bin/sh -c #(nop) ENV A=1", true},
        {"/bin/sh -c #(nop) ENV A=2", true},
        {"/bin/sh -c echo $A", false},
    }));
    EnvContext env;
    auto expanded = interpolate_all(instrs, env);
    CHECK(expanded[2].args == "echo 2");
  }
}

TEST_CASE("external package extraction") {
  auto instrs = reconstruct(config_with({
      {"/bin/sh -c git clone https://github.com/acme/libfoo.git", false},
      {"/bin/sh -c curl -L https://h/tool-2.4.1-linux-amd64.tar.gz | tar xz", false},
      {"/bin/sh -c echo hello", false},
  }));
  EnvContext env;
  auto refs = extract_external_packages(interpolate_all(instrs, env));
  REQUIRE(refs.size() == 2);

  CHECK(refs[0].kind == RefKind::git_repository);
  CHECK(refs[0].inferred_name == "libfoo");
  CHECK(refs[0].url == "https://github.com/acme/libfoo.git");
  CHECK_FALSE(refs[0].inferred_version.has_value());

  CHECK(refs[1].kind == RefKind::archive);
  CHECK(refs[1].inferred_name == "tool");
  CHECK(refs[1].inferred_version == "2.4.1");
  CHECK(refs[1].layer_index == 1);

  SECTION("every ref url appears verbatim in some instruction") {
    auto expanded = interpolate_all(instrs, env);
    for (const auto& ref : refs) {
      bool found = false;
      for (const auto& instr : expanded) {
        if (instr.args.find(ref.url) != std::string::npos) found = true;
      }
      CHECK(found);
    }
  }
}

TEST_CASE("external extraction handles ADD-with-URL and interpolated variables") {
  auto instrs = reconstruct(config_with({
      {"/bin/sh -c #(nop) ENV APPV=3.1.4", true},
      {"/bin/sh -c #(nop) ADD https://dl.example.com/app-$APPV.tar.gz /opt/", false},
      {"/bin/sh -c pip install git+https://github.com/acme/pylib.git", false},
  }));
  EnvContext env;
  auto refs = extract_external_packages(interpolate_all(instrs, env));
  REQUIRE(refs.size() == 2);
  CHECK(refs[0].url == "https://dl.example.com/app-3.1.4.tar.gz");
  CHECK(refs[0].inferred_name == "app");
  CHECK(refs[0].inferred_version == "3.1.4");
  CHECK(refs[1].kind == RefKind::git_repository);
  CHECK(refs[1].inferred_name == "pylib");
}

TEST_CASE("name/version inference from url segments") {
  auto check = [](std::string_view url, std::string_view name, std::string_view version) {
    auto [n, v] = infer_name_version(url);
    CHECK(n == name);
    if (version.empty()) {
      CHECK_FALSE(v.has_value());
    } else {
      CHECK(v == std::string(version));
    }
  };
  check("https://h/tool-2.4.1-linux-amd64.tar.gz", "tool", "2.4.1");
  check("https://h/app-v1.2.tgz", "app", "1.2");
  check("https://github.com/a/b.git", "b", "");
  check("https://h/plain.zip", "plain", "");
  check("https://h/x/v2.0.1.tar.gz", "h", "2.0.1");  // bare version: host names the package
  check("https://h/name_1.2.3_amd64.deb", "name", "1.2.3");
}

TEST_CASE("shell splitting honors quotes") {
  auto cmds = split_shell_commands("a && b | c; echo 'x && y'");
  REQUIRE(cmds.size() == 4);
  CHECK(cmds[0] == "a");
  CHECK(cmds[1] == "b");
  CHECK(cmds[2] == "c");
  CHECK(cmds[3] == "echo 'x && y'");

  auto tokens = shell_tokens("curl -o \"out file\" https://u");
  REQUIRE(tokens.size() == 4);
  CHECK(tokens[2] == "out file");
}

TEST_CASE("containerfile render carries layers") {
  auto instrs = reconstruct(config_with({
      {"/bin/sh -c #(nop) ENV A=1", true},
      {"/bin/sh -c apt-get update", false},
  }));
  std::string text = render_containerfile(instrs);
  CHECK(text.find("ENV A=1") != std::string::npos);
  CHECK(text.find("RUN apt-get update") != std::string::npos);
  CHECK(text.find("# layer 0") != std::string::npos);
}
