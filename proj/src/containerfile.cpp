#include "strata/containerfile.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace strata {

namespace {

constexpr std::array<std::pair<std::string_view, Verb>, 18> kVerbs = {{
    {"RUN", Verb::RUN}, {"COPY", Verb::COPY}, {"ADD", Verb::ADD}, {"ENV", Verb::ENV},
    {"ARG", Verb::ARG}, {"WORKDIR", Verb::WORKDIR}, {"ENTRYPOINT", Verb::ENTRYPOINT},
    {"CMD", Verb::CMD}, {"LABEL", Verb::LABEL}, {"EXPOSE", Verb::EXPOSE}, {"USER", Verb::USER},
    {"FROM", Verb::FROM}, {"VOLUME", Verb::VOLUME}, {"SHELL", Verb::SHELL},
    {"HEALTHCHECK", Verb::HEALTHCHECK}, {"STOPSIGNAL", Verb::STOPSIGNAL},
    {"MAINTAINER", Verb::MAINTAINER}, {"ONBUILD", Verb::ONBUILD},
}};

std::optional<Verb> verb_from(std::string_view word) {
  for (const auto& [name, verb] : kVerbs) {
    if (word == name) return verb;
  }
  return std::nullopt;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool consume_prefix(std::string_view* s, std::string_view prefix) {
  if (s->rfind(prefix, 0) == 0) {
    s->remove_prefix(prefix.size());
    return true;
  }
  return false;
}

std::string_view first_word(std::string_view s) {
  size_t end = 0;
  while (end < s.size() && !std::isspace(static_cast<unsigned char>(s[end]))) ++end;
  return s.substr(0, end);
}

// created_by comes in a handful of builder dialects:
//   classic:  /bin/sh -c #(nop)  ENV A=1      (metadata)
//   classic:  /bin/sh -c apt-get update       (RUN)
//   buildkit: RUN /bin/sh -c wget ... # buildkit
//   buildkit: ENV A=1
//   buildkit: |2 X=1 Y=2 /bin/sh -c make # buildkit   (RUN with build args)
void parse_created_by(std::string_view raw, Verb* verb, std::string* args) {
  std::string_view s = trim(raw);

  bool buildkit = false;
  if (s.size() > 10 && s.substr(s.size() - 10) == "# buildkit") {
    buildkit = true;
    s = trim(s.substr(0, s.size() - 10));
  }

  auto strip_shell = [&](std::string_view body) -> std::string_view {
    std::string_view b = trim(body);
    if (consume_prefix(&b, "/bin/sh -c") || consume_prefix(&b, "/bin/bash -c") ||
        consume_prefix(&b, "sh -c") || consume_prefix(&b, "bash -c") ||
        consume_prefix(&b, "cmd /S /C")) {
      return trim(b);
    }
    return b;
  };

  // leading "|N k=v ..." build-arg block (buildkit)
  std::string_view working = s;
  if (!working.empty() && working.front() == '|') {
    size_t i = 1;
    while (i < working.size() && std::isdigit(static_cast<unsigned char>(working[i]))) ++i;
    if (i > 1 && i < working.size() && working[i] == ' ') {
      std::string_view rest = working.substr(i + 1);
      size_t sh = rest.find("/bin/sh -c");
      if (sh == std::string_view::npos) sh = rest.find("sh -c");
      if (sh != std::string_view::npos) {
        *verb = Verb::RUN;
        *args = std::string(strip_shell(rest.substr(sh)));
        return;
      }
    }
  }

  if (consume_prefix(&working, "/bin/sh -c") || consume_prefix(&working, "/bin/bash -c")) {
    working = trim(working);
    if (consume_prefix(&working, "#(nop)")) {
      working = trim(working);
      std::string_view word = first_word(working);
      if (auto v = verb_from(word)) {
        *verb = *v;
        *args = std::string(trim(working.substr(word.size())));
        return;
      }
      *verb = Verb::other;
      *args = std::string(working);
      return;
    }
    *verb = Verb::RUN;
    *args = std::string(working);
    return;
  }

  std::string_view word = first_word(working);
  if (auto v = verb_from(word)) {
    *verb = *v;
    std::string_view body = trim(working.substr(word.size()));
    if (*v == Verb::RUN) body = strip_shell(body);
    *args = std::string(body);
    return;
  }

  if (buildkit) {  // bare command recorded by buildkit
    *verb = Verb::RUN;
    *args = std::string(strip_shell(working));
    return;
  }
  *verb = Verb::other;
  *args = std::string(working);
}

// KEY=VALUE assignments from an ENV/ARG body; supports the legacy
// "ENV KEY value" single-pair form and quoted values.
std::vector<std::pair<std::string, std::string>> parse_assignments(std::string_view body) {
  std::vector<std::pair<std::string, std::string>> out;
  body = trim(body);
  if (body.empty()) return out;

  if (body.find('=') == std::string_view::npos) {
    std::string_view key = first_word(body);
    if (!key.empty()) {
      out.emplace_back(std::string(key), std::string(trim(body.substr(key.size()))));
    }
    return out;
  }

  std::vector<std::string> tokens = shell_tokens(body);
  for (const std::string& token : tokens) {
    size_t eq = token.find('=');
    if (eq == std::string::npos || eq == 0) continue;
    out.emplace_back(token.substr(0, eq), token.substr(eq + 1));
  }
  return out;
}

bool is_name_char(char c, bool first) {
  if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return true;
  return !first && std::isdigit(static_cast<unsigned char>(c));
}

}  // namespace

std::string_view to_string(Verb verb) {
  for (const auto& [name, v] : kVerbs) {
    if (v == verb) return name;
  }
  return "other";
}

std::string_view to_string(RefKind kind) {
  switch (kind) {
    case RefKind::git_repository: return "git-repository";
    case RefKind::archive: return "archive";
    case RefKind::binary: return "binary";
    case RefKind::script: return "script";
  }
  return "binary";
}

std::vector<ReconstructedInstruction> reconstruct(const ImageConfig& config) {
  std::vector<ReconstructedInstruction> out;
  size_t layer = 0;
  for (const HistoryEntry& entry : config.history) {
    ReconstructedInstruction instr;
    instr.raw_text = entry.created_by;
    if (!entry.empty_layer) instr.layer_index = layer++;
    if (!entry.created_by.empty()) {
      parse_created_by(entry.created_by, &instr.verb, &instr.args);
    }
    out.push_back(std::move(instr));
  }
  return out;
}

std::string interpolate(const ReconstructedInstruction& instr, EnvContext& ctx) {
  const std::string& in = instr.args;
  std::string out;
  out.reserve(in.size());

  for (size_t i = 0; i < in.size();) {
    char c = in[i];
    if (c == '\\' && i + 1 < in.size() && in[i + 1] == '$') {
      out.push_back('$');
      i += 2;
      continue;
    }
    if (c != '$') {
      out.push_back(c);
      ++i;
      continue;
    }
    // ${NAME} or $NAME
    size_t start = i + 1;
    bool braced = start < in.size() && in[start] == '{';
    size_t name_begin = braced ? start + 1 : start;
    size_t j = name_begin;
    while (j < in.size() && is_name_char(in[j], j == name_begin)) ++j;
    std::string name = in.substr(name_begin, j - name_begin);
    size_t end = j;
    if (braced) {
      // tolerate ${NAME:-default}: the default is ignored, name lookup only
      size_t close = in.find('}', j);
      if (close == std::string::npos || name.empty()) {
        out.push_back(c);
        ++i;
        continue;
      }
      end = close + 1;
    }
    if (name.empty()) {
      out.push_back(c);
      ++i;
      continue;
    }
    auto it = ctx.values.find(name);
    if (it != ctx.values.end()) {
      out.append(it->second);
    } else {
      out.append(in.substr(i, end - i));  // left verbatim
      if (std::find(ctx.unresolved.begin(), ctx.unresolved.end(), name) ==
          ctx.unresolved.end()) {
        ctx.unresolved.push_back(name);
      }
    }
    i = end;
  }
  return out;
}

std::vector<ReconstructedInstruction> interpolate_all(
    const std::vector<ReconstructedInstruction>& instrs, EnvContext& ctx) {
  std::vector<ReconstructedInstruction> out;
  out.reserve(instrs.size());
  for (const ReconstructedInstruction& instr : instrs) {
    ReconstructedInstruction expanded = instr;
    expanded.args = interpolate(instr, ctx);
    if (instr.verb == Verb::ENV || instr.verb == Verb::ARG) {
      for (auto& [key, value] : parse_assignments(expanded.args)) {
        ctx.assign(key, value);
      }
    }
    out.push_back(std::move(expanded));
  }
  return out;
}

std::vector<std::string> split_shell_commands(std::string_view command_line) {
  std::vector<std::string> out;
  std::string current;
  char quote = '\0';
  for (size_t i = 0; i < command_line.size(); ++i) {
    char c = command_line[i];
    if (quote != '\0') {
      current.push_back(c);
      if (c == quote) quote = '\0';
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
      current.push_back(c);
      continue;
    }
    if (c == '&' && i + 1 < command_line.size() && command_line[i + 1] == '&') {
      out.push_back(current);
      current.clear();
      ++i;
      continue;
    }
    if (c == '|' && i + 1 < command_line.size() && command_line[i + 1] == '|') {
      out.push_back(current);
      current.clear();
      ++i;
      continue;
    }
    if (c == '|' || c == ';' || c == '\n') {
      out.push_back(current);
      current.clear();
      continue;
    }
    current.push_back(c);
  }
  out.push_back(current);

  std::vector<std::string> trimmed;
  for (std::string& cmd : out) {
    std::string_view t = trim(cmd);
    if (!t.empty()) trimmed.emplace_back(t);
  }
  return trimmed;
}

std::vector<std::string> shell_tokens(std::string_view command) {
  std::vector<std::string> tokens;
  std::string current;
  char quote = '\0';
  bool in_token = false;
  for (char c : command) {
    if (quote != '\0') {
      if (c == quote) {
        quote = '\0';
      } else {
        current.push_back(c);
      }
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
      in_token = true;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (in_token) {
        tokens.push_back(current);
        current.clear();
        in_token = false;
      }
      continue;
    }
    current.push_back(c);
    in_token = true;
  }
  if (in_token) tokens.push_back(current);
  return tokens;
}

namespace {

bool looks_like_url(std::string_view token) {
  return token.rfind("http://", 0) == 0 || token.rfind("https://", 0) == 0 ||
         token.rfind("ftp://", 0) == 0 || token.rfind("git://", 0) == 0;
}

constexpr std::array<std::string_view, 12> kArchiveSuffixes = {
    ".tar.gz", ".tgz", ".tar.xz", ".txz", ".tar.bz2", ".tar.zst",
    ".tar", ".zip", ".gem", ".whl", ".deb", ".rpm",
};

constexpr std::array<std::string_view, 4> kScriptSuffixes = {".sh", ".py", ".pl", ".rb"};

RefKind kind_for_url(std::string_view url) {
  std::string_view path = url;
  size_t q = path.find_first_of("?#");
  if (q != std::string_view::npos) path = path.substr(0, q);
  if (path.size() > 4 && path.substr(path.size() - 4) == ".git") return RefKind::git_repository;
  for (std::string_view suffix : kArchiveSuffixes) {
    if (path.size() > suffix.size() && path.substr(path.size() - suffix.size()) == suffix) {
      return RefKind::archive;
    }
  }
  for (std::string_view suffix : kScriptSuffixes) {
    if (path.size() > suffix.size() && path.substr(path.size() - suffix.size()) == suffix) {
      return RefKind::script;
    }
  }
  return RefKind::binary;
}

std::string_view strip_archive_suffix(std::string_view segment) {
  for (std::string_view suffix : kArchiveSuffixes) {
    if (segment.size() > suffix.size() &&
        segment.substr(segment.size() - suffix.size()) == suffix) {
      return segment.substr(0, segment.size() - suffix.size());
    }
  }
  for (std::string_view suffix : kScriptSuffixes) {
    if (segment.size() > suffix.size() &&
        segment.substr(segment.size() - suffix.size()) == suffix) {
      return segment.substr(0, segment.size() - suffix.size());
    }
  }
  if (segment.size() > 4 && segment.substr(segment.size() - 4) == ".git") {
    return segment.substr(0, segment.size() - 4);
  }
  return segment;
}

// version token: optional v prefix, 2..4 dotted numeric fields, optional
// pre-release/build suffix
bool is_version_token(std::string_view token) {
  std::string_view t = token;
  if (!t.empty() && (t.front() == 'v' || t.front() == 'V')) t.remove_prefix(1);
  if (t.empty() || !std::isdigit(static_cast<unsigned char>(t.front()))) return false;
  int fields = 0;
  size_t i = 0;
  while (i < t.size()) {
    if (!std::isdigit(static_cast<unsigned char>(t[i]))) break;
    while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
    ++fields;
    if (i < t.size() && t[i] == '.') {
      ++i;
      if (i == t.size() || !std::isdigit(static_cast<unsigned char>(t[i]))) return false;
      continue;
    }
    break;
  }
  if (fields < 2 || fields > 4) return false;
  if (i == t.size()) return true;
  // pre-release or build suffix
  char sep = t[i];
  if (sep != '-' && sep != '~' && sep != '+' && sep != '.') return false;
  return i + 1 < t.size();
}

}  // namespace

std::pair<std::string, std::optional<std::string>> infer_name_version(std::string_view url) {
  std::string_view path = url;
  size_t scheme = path.find("://");
  std::string_view host;
  if (scheme != std::string_view::npos) {
    path = path.substr(scheme + 3);
    size_t slash = path.find('/');
    host = path.substr(0, slash == std::string_view::npos ? path.size() : slash);
  }
  size_t q = path.find_first_of("?#");
  if (q != std::string_view::npos) path = path.substr(0, q);
  while (!path.empty() && path.back() == '/') path.remove_suffix(1);

  size_t slash = path.rfind('/');
  std::string_view segment = slash == std::string_view::npos ? std::string_view() : path.substr(slash + 1);
  if (segment.empty()) {
    return {std::string(host.empty() ? path : host), std::nullopt};
  }
  segment = strip_archive_suffix(segment);

  // split on '-' and '_', keep the last version-shaped token
  std::vector<std::string_view> parts;
  size_t start = 0;
  for (size_t i = 0; i <= segment.size(); ++i) {
    if (i == segment.size() || segment[i] == '-' || segment[i] == '_') {
      if (i > start) parts.push_back(segment.substr(start, i - start));
      start = i + 1;
    }
  }
  int version_at = -1;
  for (int i = static_cast<int>(parts.size()) - 1; i >= 0; --i) {
    if (is_version_token(parts[static_cast<size_t>(i)])) {
      version_at = i;
      break;
    }
  }
  if (version_at <= 0) {
    // no version, or nothing before it to use as a name
    if (version_at == 0 && parts.size() == 1) {
      std::string_view v = parts[0];
      std::string version(v.front() == 'v' || v.front() == 'V' ? v.substr(1) : v);
      return {std::string(host.empty() ? segment : host), version};
    }
    return {std::string(segment), std::nullopt};
  }
  std::string name;
  for (int i = 0; i < version_at; ++i) {
    if (!name.empty()) name.push_back('-');
    name.append(parts[static_cast<size_t>(i)]);
  }
  std::string_view v = parts[static_cast<size_t>(version_at)];
  if (v.front() == 'v' || v.front() == 'V') v.remove_prefix(1);
  return {name, std::string(v)};
}

std::vector<ExternalPackageRef> extract_external_packages(
    const std::vector<ReconstructedInstruction>& interpolated) {
  std::vector<ExternalPackageRef> refs;

  auto add_ref = [&refs](std::string url, std::optional<size_t> layer,
                         std::optional<RefKind> forced_kind = std::nullopt) {
    for (const ExternalPackageRef& existing : refs) {
      if (existing.url == url && existing.layer_index == layer) return;
    }
    ExternalPackageRef ref;
    ref.url = url;
    ref.kind = forced_kind.value_or(kind_for_url(url));
    auto [name, version] = infer_name_version(url);
    ref.inferred_name = name.empty() ? std::string(url) : name;
    ref.inferred_version = version;
    ref.layer_index = layer;
    refs.push_back(std::move(ref));
  };

  constexpr std::array<std::string_view, 10> kInstallTools = {
      "pip", "pip3", "npm", "yarn", "gem", "composer", "go", "cargo", "pecl", "easy_install",
  };

  for (const ReconstructedInstruction& instr : interpolated) {
    if (instr.verb == Verb::ADD) {
      std::vector<std::string> tokens = shell_tokens(instr.args);
      for (const std::string& token : tokens) {
        if (looks_like_url(token)) add_ref(token, instr.layer_index);
      }
      continue;
    }
    if (instr.verb != Verb::RUN && instr.verb != Verb::other) continue;

    for (const std::string& command : split_shell_commands(instr.args)) {
      std::vector<std::string> tokens = shell_tokens(command);
      if (tokens.empty()) continue;
      std::string_view tool = tokens[0];
      size_t base = tool.rfind('/');
      if (base != std::string_view::npos) tool = tool.substr(base + 1);

      if (tool == "git") {
        auto clone = std::find(tokens.begin() + 1, tokens.end(), "clone");
        if (clone != tokens.end()) {
          for (auto it = clone + 1; it != tokens.end(); ++it) {
            if (!it->empty() && (*it)[0] == '-') continue;
            if (looks_like_url(*it) || it->find("://") != std::string::npos ||
                it->find('@') != std::string::npos) {
              add_ref(*it, instr.layer_index, RefKind::git_repository);
              break;
            }
          }
        }
        continue;
      }

      const bool fetcher = tool == "wget" || tool == "curl";
      const bool installer =
          std::find(kInstallTools.begin(), kInstallTools.end(), tool) != kInstallTools.end();
      if (!fetcher && !installer) continue;

      for (size_t i = 1; i < tokens.size(); ++i) {
        const std::string& token = tokens[i];
        if (looks_like_url(token)) {
          add_ref(token, instr.layer_index);
        } else if (installer && token.rfind("git+", 0) == 0 &&
                   token.find("://") != std::string::npos) {
          add_ref(token.substr(4), instr.layer_index, RefKind::git_repository);
        }
      }
    }
  }
  return refs;
}

std::string render_containerfile(const std::vector<ReconstructedInstruction>& instrs) {
  std::string out;
  for (const ReconstructedInstruction& instr : instrs) {
    if (instr.verb == Verb::other) {
      out += "# unparsed: " + instr.raw_text + "\n";
      continue;
    }
    out += std::string(to_string(instr.verb)) + " " + instr.args;
    if (instr.layer_index) {
      out += "    # layer " + std::to_string(*instr.layer_index);
    }
    out += "\n";
  }
  return out;
}

}  // namespace strata
