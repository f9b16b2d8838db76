#include "strata/detect.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>

#include <nlohmann/json.hpp>

#include "strata/io.hpp"
#include "strata/paths.hpp"

namespace strata {

namespace {

using ordered_json = nlohmann::ordered_json;

bool glob_match(std::string_view pattern, std::string_view text) {
  size_t p = 0, t = 0;
  size_t star_p = std::string_view::npos, star_t = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == text[t] || pattern[p] == '?')) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star_p = p++;
      star_t = t;
    } else if (star_p != std::string_view::npos) {
      p = star_p + 1;
      t = ++star_t;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

std::optional<Tactic> tactic_from(std::string_view name) {
  static constexpr std::array<std::pair<std::string_view, Tactic>, 8> kTactics = {{
      {"OS", Tactic::OS}, {"OSPKG", Tactic::OSPKG}, {"DEP", Tactic::DEP}, {"PKG", Tactic::PKG},
      {"URL", Tactic::URL}, {"COMPRESS", Tactic::COMPRESS}, {"LINK", Tactic::LINK},
      {"ALIAS", Tactic::ALIAS},
  }};
  for (const auto& [n, t] : kTactics) {
    if (n == name) return t;
  }
  return std::nullopt;
}

int status_rank(FindingStatus s) {
  switch (s) {
    case FindingStatus::missing: return 0;
    case FindingStatus::modified: return 1;
    case FindingStatus::deleted: return 2;
    case FindingStatus::detected: return 3;
  }
  return 4;
}

// dpkg-style segment comparison, enough to order package versions
int compare_versions(std::string_view a, std::string_view b) {
  size_t i = 0, j = 0;
  auto digit = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; };
  while (i < a.size() || j < b.size()) {
    size_t i0 = i, j0 = j;
    while (i < a.size() && !digit(a[i])) ++i;
    while (j < b.size() && !digit(b[j])) ++j;
    std::string_view sa = a.substr(i0, i - i0);
    std::string_view sb = b.substr(j0, j - j0);
    if (sa != sb) return sa < sb ? -1 : 1;

    i0 = i;
    j0 = j;
    while (i < a.size() && digit(a[i])) ++i;
    while (j < b.size() && digit(b[j])) ++j;
    unsigned long long na = 0, nb = 0;
    for (char c : a.substr(i0, i - i0)) na = na * 10 + static_cast<unsigned>(c - '0');
    for (char c : b.substr(j0, j - j0)) nb = nb * 10 + static_cast<unsigned>(c - '0');
    if (na != nb) return na < nb ? -1 : 1;
  }
  return 0;
}

// patterns use the Table-style ecosystem labels; packages use enum names
Ecosystem ecosystem_for_label(std::string_view label) {
  if (label == "dpkg") return Ecosystem::deb;
  if (label == "rpm") return Ecosystem::rpm;
  if (label == "apk") return Ecosystem::apk;
  if (label == "python") return Ecosystem::pypi;
  if (label == "ruby") return Ecosystem::gem;
  if (label == "node.js") return Ecosystem::npm;
  if (label == "php") return Ecosystem::composer;
  if (label == "go") return Ecosystem::golang;
  return Ecosystem::external;
}

}  // namespace

std::string_view to_string(Tactic tactic) {
  switch (tactic) {
    case Tactic::OS: return "OS";
    case Tactic::OSPKG: return "OSPKG";
    case Tactic::DEP: return "DEP";
    case Tactic::PKG: return "PKG";
    case Tactic::URL: return "URL";
    case Tactic::COMPRESS: return "COMPRESS";
    case Tactic::LINK: return "LINK";
    case Tactic::ALIAS: return "ALIAS";
  }
  return "OS";
}

std::string_view to_string(FindingStatus status) {
  switch (status) {
    case FindingStatus::missing: return "Missing";
    case FindingStatus::modified: return "Modified";
    case FindingStatus::deleted: return "Deleted";
    case FindingStatus::detected: return "Detected";
  }
  return "Detected";
}

bool PatternRow::matches(std::string_view path, bool is_dir) const {
  if (kind == MatchKind::basename_glob) {
    return glob_match(pattern, basename_of(path));
  }
  if (path.find(pattern) != std::string_view::npos) return true;
  if (is_dir && !pattern.empty() && pattern.back() == '/') {
    std::string with_slash = std::string(path) + "/";
    return with_slash.find(pattern) != std::string::npos;
  }
  return false;
}

PatternTable PatternTable::defaults() {
  PatternTable table;
  auto add = [&table](Tactic tactic, std::string_view ecosystem, std::string_view pattern,
                      MatchKind kind) {
    table.rows.push_back({tactic, std::string(ecosystem), std::string(pattern), kind});
  };

  add(Tactic::OS, "any", "os-release", MatchKind::basename_glob);
  add(Tactic::OS, "any", "*-release", MatchKind::basename_glob);
  add(Tactic::OS, "any", "debian_version", MatchKind::basename_glob);

  add(Tactic::OSPKG, "dpkg", "dpkg/status", MatchKind::substring);
  add(Tactic::OSPKG, "dpkg", "var/lib/dpkg", MatchKind::substring);
  add(Tactic::OSPKG, "rpm", "rpm/Packages", MatchKind::substring);
  add(Tactic::OSPKG, "rpm", "rpmdb.sqlite", MatchKind::basename_glob);
  add(Tactic::OSPKG, "rpm", "var/lib/yum", MatchKind::substring);
  add(Tactic::OSPKG, "rpm", "var/cache/yum", MatchKind::substring);
  add(Tactic::OSPKG, "rpm", "yum.repos.d", MatchKind::substring);
  add(Tactic::OSPKG, "apk", "apk/db/installed", MatchKind::substring);
  add(Tactic::OSPKG, "apk", "apk/world", MatchKind::substring);

  add(Tactic::DEP, "python", "Pipfile", MatchKind::basename_glob);
  add(Tactic::DEP, "python", "requirements.txt", MatchKind::basename_glob);
  add(Tactic::DEP, "ruby", "*.gemspec", MatchKind::basename_glob);
  add(Tactic::DEP, "node.js", "package.json", MatchKind::basename_glob);
  add(Tactic::DEP, "node.js", "package-lock.json", MatchKind::basename_glob);
  add(Tactic::DEP, "node.js", "yarn.lock", MatchKind::basename_glob);
  add(Tactic::DEP, "php", "composer.json", MatchKind::basename_glob);
  add(Tactic::DEP, "php", "composer.lock", MatchKind::basename_glob);
  add(Tactic::DEP, "go", "go.sum", MatchKind::basename_glob);
  add(Tactic::DEP, "go", "go.mod", MatchKind::basename_glob);

  add(Tactic::PKG, "python", "dist-info/", MatchKind::substring);
  add(Tactic::PKG, "python", "egg-info/", MatchKind::substring);
  add(Tactic::PKG, "python", "site-packages/", MatchKind::substring);
  add(Tactic::PKG, "python", "dist-packages/", MatchKind::substring);
  add(Tactic::PKG, "ruby", "gems/", MatchKind::substring);
  add(Tactic::PKG, "node.js", "node_modules/", MatchKind::substring);
  add(Tactic::PKG, "php", "/vendor/", MatchKind::substring);
  add(Tactic::PKG, "go", "/go/", MatchKind::substring);

  return table;
}

void PatternTable::extend_from_text(std::string_view text) {
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    bool at_end = eol == text.size();
    pos = eol + 1;

    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) {
      line.remove_prefix(1);
    }
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) {
      line.remove_suffix(1);
    }
    if (!line.empty() && line.front() != '#') {
      std::istringstream fields{std::string(line)};
      std::string tactic_name, ecosystem, pattern;
      fields >> tactic_name >> ecosystem >> pattern;
      auto tactic = tactic_from(tactic_name);
      if (tactic && !ecosystem.empty() && !pattern.empty()) {
        MatchKind kind = pattern.find('/') != std::string::npos ? MatchKind::substring
                                                                : MatchKind::basename_glob;
        rows.push_back({*tactic, ecosystem, pattern, kind});
      }
    }
    if (at_end) break;
  }
}

void PatternTable::extend_from_file(const std::filesystem::path& path) {
  extend_from_text(read_file(path));
}

ObscurationReport detect(const FileHistory& history, const SquashedView& squashed,
                         const std::vector<ReconstructedInstruction>& instrs,
                         const std::vector<ExternalPackageRef>& refs,
                         const PatternTable& table, std::string image_name,
                         size_t layer_count) {
  (void)squashed;  // history covers the alive set; kept for interface symmetry
  ObscurationReport report;
  report.image = std::move(image_name);

  std::vector<ObscurationFinding> findings;
  auto add_finding = [&findings](ObscurationFinding f) {
    for (const ObscurationFinding& existing : findings) {
      if (existing.tactic == f.tactic && existing.status == f.status &&
          existing.path == f.path && existing.layer_index == f.layer_index) {
        return;
      }
    }
    findings.push_back(std::move(f));
  };

  // Modified/Deleted: any pattern-matching path whose history shows events
  bool tactic_seen[2] = {false, false};  // OS, OSPKG: any match across all layers
  for (const auto& [path, events] : history.paths) {
    const bool is_dir = !events.empty() && events.back().entry.kind == FileKind::directory;
    for (const PatternRow& row : table.rows) {
      if (!row.matches(path, is_dir)) continue;
      if (row.tactic == Tactic::OS) tactic_seen[0] = true;
      if (row.tactic == Tactic::OSPKG) tactic_seen[1] = true;

      for (const FileEvent& event : events) {
        if (event.action == FileAction::added) continue;
        ObscurationFinding f;
        f.tactic = row.tactic;
        f.status = event.action == FileAction::modified ? FindingStatus::modified
                                                        : FindingStatus::deleted;
        f.path = path;
        f.layer_index = event.layer_index;
        f.ecosystem = row.ecosystem;
        f.evidence = std::string(to_string(event.action)) + " at layer " +
                     std::to_string(event.layer_index) + " (pattern: " + row.pattern + ")";
        if (event.action == FileAction::modified) {
          f.prior_digest = event.prior_digest;
          f.new_digest = event.entry.content_digest;
        }
        add_finding(std::move(f));
      }
    }
  }

  // Missing: OS / OSPKG evidence absent from every layer
  if (!tactic_seen[0]) {
    ObscurationFinding f;
    f.tactic = Tactic::OS;
    f.status = FindingStatus::missing;
    f.evidence = "no OS identification file in any layer";
    add_finding(std::move(f));
  }
  if (!tactic_seen[1]) {
    ObscurationFinding f;
    f.tactic = Tactic::OSPKG;
    f.status = FindingStatus::missing;
    f.evidence = "no OS package manager database in any layer";
    add_finding(std::move(f));
  }

  // URL: every external download is a finding
  for (const ExternalPackageRef& ref : refs) {
    ObscurationFinding f;
    f.tactic = Tactic::URL;
    f.status = FindingStatus::detected;
    f.layer_index = ref.layer_index;
    f.ecosystem = "external";
    f.evidence = ref.url;
    add_finding(std::move(f));
  }

  // COMPRESS: stripped or collapsed history
  {
    size_t with_command = 0;
    size_t filesystem_commands = 0;
    for (const ReconstructedInstruction& instr : instrs) {
      if (!instr.raw_text.empty()) ++with_command;
      if (instr.verb == Verb::RUN || instr.verb == Verb::COPY || instr.verb == Verb::ADD) {
        ++filesystem_commands;
      }
    }
    std::string why;
    if (instrs.empty() || with_command == 0) {
      why = "config history carries no commands";
    } else if (layer_count == 1 && filesystem_commands >= 2) {
      why = "history advertises " + std::to_string(filesystem_commands) +
            " filesystem commands but the image has a single layer";
    }
    if (!why.empty()) {
      ObscurationFinding f;
      f.tactic = Tactic::COMPRESS;
      f.status = FindingStatus::detected;
      f.evidence = why;
      add_finding(std::move(f));
    }
  }

  // LINK / ALIAS: Containerfile text only; links created outside the build
  // are undetectable by construction
  auto match_token = [&table, &add_finding](Tactic tactic, std::string_view token,
                                            std::optional<size_t> layer,
                                            const std::string& evidence) {
    for (const PatternRow& row : table.rows) {
      if (!row.matches(token, true)) continue;
      ObscurationFinding f;
      f.tactic = tactic;
      f.status = FindingStatus::detected;
      f.path = std::string(token);
      f.layer_index = layer;
      f.ecosystem = row.ecosystem;
      f.evidence = evidence;
      add_finding(std::move(f));
      return;
    }
  };

  for (const ReconstructedInstruction& instr : instrs) {
    if (instr.verb != Verb::RUN && instr.verb != Verb::ENV && instr.verb != Verb::other) continue;

    for (const std::string& command : split_shell_commands(instr.args)) {
      std::vector<std::string> tokens = shell_tokens(command);
      if (tokens.empty()) continue;
      std::string_view tool = tokens[0];
      if (size_t slash = tool.rfind('/'); slash != std::string_view::npos) {
        tool = tool.substr(slash + 1);
      }
      if (tool == "ln") {
        for (size_t i = 1; i < tokens.size(); ++i) {
          if (!tokens[i].empty() && tokens[i].front() == '-') continue;
          match_token(Tactic::LINK, tokens[i], instr.layer_index, command);
        }
      }
    }

    // alias definitions can hide inside echo/profile writes and env values
    std::string_view text = instr.args;
    size_t at = 0;
    while ((at = text.find("alias ", at)) != std::string_view::npos) {
      std::string_view rest = text.substr(at + 6);
      size_t stop = rest.find_first_of(";&|\n\"'");
      if (stop != std::string_view::npos) rest = rest.substr(0, stop);
      for (const std::string& token : shell_tokens(rest)) {
        std::string_view value = token;
        if (size_t eq = value.find('='); eq != std::string_view::npos) {
          value = value.substr(eq + 1);
        }
        match_token(Tactic::ALIAS, value, instr.layer_index, std::string(instr.args));
      }
      at += 6;
    }
  }

  std::sort(findings.begin(), findings.end(),
            [](const ObscurationFinding& a, const ObscurationFinding& b) {
              if (a.tactic != b.tactic) return static_cast<int>(a.tactic) < static_cast<int>(b.tactic);
              if (a.status != b.status) return status_rank(a.status) < status_rank(b.status);
              size_t la = a.layer_index.value_or(0), lb = b.layer_index.value_or(0);
              if (la != lb) return la < lb;
              return a.path.value_or("") < b.path.value_or("");
            });
  report.findings = std::move(findings);
  for (const ObscurationFinding& f : report.findings) {
    ++report.counts_by_tactic[std::string(to_string(f.tactic))];
  }
  report.is_obscure = !report.findings.empty();
  return report;
}

void classify_false_positive_candidates(ObscurationReport* report,
                                        const std::vector<Package>& packages) {
  for (ObscurationFinding& f : report->findings) {
    if (f.status != FindingStatus::modified) continue;  // deletions are never benign
    if (f.prior_digest && f.new_digest && *f.prior_digest == *f.new_digest) {
      f.annotation = "content-identical";
      continue;
    }
    if (!f.ecosystem) continue;
    Ecosystem ecosystem = ecosystem_for_label(*f.ecosystem);

    // a version of some package in this ecosystem increased across the
    // modification layer: the modified database most likely records an update
    bool benign = false;
    for (const Package& old_pkg : packages) {
      if (!old_pkg.obscured || old_pkg.ecosystem != ecosystem || !old_pkg.version) continue;
      for (const Package& new_pkg : packages) {
        if (new_pkg.obscured || new_pkg.ecosystem != ecosystem || !new_pkg.version) continue;
        if (new_pkg.name != old_pkg.name) continue;
        if (new_pkg.source_layer < old_pkg.source_layer) continue;
        if (compare_versions(*old_pkg.version, *new_pkg.version) < 0) {
          benign = true;
          break;
        }
      }
      if (benign) break;
    }
    if (benign) f.annotation = "likely-benign-update";
  }
}

std::string report_to_json(const ObscurationReport& report, int indent) {
  ordered_json doc;
  doc["schemaVersion"] = 1;
  doc["image"] = report.image;
  doc["obscure"] = report.is_obscure;
  ordered_json counts = ordered_json::object();
  for (const auto& [tactic, n] : report.counts_by_tactic) counts[tactic] = n;
  doc["countsByTactic"] = counts;
  ordered_json list = ordered_json::array();
  for (const ObscurationFinding& f : report.findings) {
    ordered_json item;
    item["tactic"] = std::string(to_string(f.tactic));
    item["status"] = std::string(to_string(f.status));
    if (f.path) item["path"] = *f.path;
    if (f.layer_index) item["layer"] = *f.layer_index;
    if (f.ecosystem) item["ecosystem"] = *f.ecosystem;
    item["evidence"] = f.evidence;
    if (!f.annotation.empty()) item["annotation"] = f.annotation;
    list.push_back(std::move(item));
  }
  doc["findings"] = std::move(list);
  return doc.dump(indent) + "\n";
}

std::string render_report_table(const ObscurationReport& report) {
  // three Table-style columns; Detected findings (URL/LINK/ALIAS) render
  // under Missing, which is where that class of evidence is counted
  std::map<Tactic, std::array<size_t, 3>> grid;
  for (const ObscurationFinding& f : report.findings) {
    size_t column = 0;
    switch (f.status) {
      case FindingStatus::missing:
      case FindingStatus::detected: column = 0; break;
      case FindingStatus::modified: column = 1; break;
      case FindingStatus::deleted: column = 2; break;
    }
    ++grid[f.tactic][column];
  }

  std::ostringstream out;
  out << "image: " << report.image << "\n";
  out << "obscure: " << (report.is_obscure ? "yes" : "no") << "\n";
  out << "tactic     missing  modified  deleted\n";
  for (const auto& [tactic, row] : grid) {
    std::string name(to_string(tactic));
    name.resize(10, ' ');
    out << name << " " << row[0] << "        " << row[1] << "         " << row[2] << "\n";
  }
  for (const ObscurationFinding& f : report.findings) {
    out << "- " << to_string(f.tactic) << "/" << to_string(f.status);
    if (f.path) out << " " << *f.path;
    if (f.layer_index) out << " (layer " << *f.layer_index << ")";
    if (!f.annotation.empty()) out << " [" << f.annotation << "]";
    out << ": " << f.evidence << "\n";
  }
  return out.str();
}

}  // namespace strata
