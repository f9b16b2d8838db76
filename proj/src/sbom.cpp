#include "strata/sbom.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <nlohmann/json.hpp>

namespace strata {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string percent_encode(std::string_view s, std::string_view keep = "") {
  static const char* hexdig = "0123456789ABCDEF";
  std::string out;
  for (char c : s) {
    const bool unreserved = std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
                            c == '.' || c == '_' || c == '~';
    if (unreserved || keep.find(c) != std::string_view::npos) {
      out.push_back(c);
    } else {
      out.push_back('%');
      out.push_back(hexdig[(static_cast<unsigned char>(c) >> 4) & 0xf]);
      out.push_back(hexdig[static_cast<unsigned char>(c) & 0xf]);
    }
  }
  return out;
}

// PEP 503 normalization: lowercase, runs of -_. collapse to a dash
std::string normalize_pypi_name(std::string_view name) {
  std::string out;
  bool pending_dash = false;
  for (char c : name) {
    if (c == '-' || c == '_' || c == '.') {
      pending_dash = !out.empty();
      continue;
    }
    if (pending_dash) {
      out.push_back('-');
      pending_dash = false;
    }
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::string spdx_id_component(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') {
      out.push_back(c);
    } else {
      out.push_back('-');
    }
  }
  return out;
}

std::string tool_creator() {
  return "Tool: " + std::string(kToolName) + "-" + std::string(kToolVersion);
}

ordered_json annotation(const std::string& created, const std::string& comment) {
  ordered_json a;
  a["annotationType"] = "OTHER";
  a["annotator"] = tool_creator();
  a["annotationDate"] = created;
  a["comment"] = comment;
  return a;
}

}  // namespace

std::string make_purl(const Package& package, const std::optional<OsRelease>& os) {
  std::string type;
  std::string ns;
  std::string name = package.name;
  std::string version = package.version.value_or("");

  switch (package.ecosystem) {
    case Ecosystem::deb:
      type = "deb";
      ns = os && !os->os_id.empty() ? os->os_id : "debian";
      break;
    case Ecosystem::apk:
      type = "apk";
      ns = os && !os->os_id.empty() ? os->os_id : "alpine";
      break;
    case Ecosystem::rpm:
      type = "rpm";
      if (os && !os->os_id.empty()) ns = os->os_id;
      break;
    case Ecosystem::pypi:
      type = "pypi";
      name = normalize_pypi_name(name);
      break;
    case Ecosystem::npm: {
      type = "npm";
      size_t slash = name.find('/');
      if (!name.empty() && name.front() == '@' && slash != std::string::npos) {
        ns = name.substr(0, slash);
        name = name.substr(slash + 1);
      }
      break;
    }
    case Ecosystem::gem:
      type = "gem";
      break;
    case Ecosystem::composer: {
      type = "composer";
      size_t slash = name.find('/');
      if (slash != std::string::npos) {
        ns = name.substr(0, slash);
        name = name.substr(slash + 1);
      }
      break;
    }
    case Ecosystem::golang: {
      type = "golang";
      size_t last = name.rfind('/');
      if (last != std::string::npos) {
        ns = name.substr(0, last);
        name = name.substr(last + 1);
      }
      break;
    }
    case Ecosystem::external:
      type = "generic";
      break;
  }

  std::string purl = "pkg:" + type + "/";
  if (!ns.empty()) {
    // namespace segments keep their slashes, everything else is encoded
    std::string encoded;
    size_t pos = 0;
    while (pos <= ns.size()) {
      size_t slash = ns.find('/', pos);
      if (slash == std::string::npos) slash = ns.size();
      if (!encoded.empty()) encoded.push_back('/');
      encoded += percent_encode(ns.substr(pos, slash - pos));
      pos = slash + 1;
    }
    purl += encoded + "/";
  }
  purl += percent_encode(name);
  if (!version.empty()) purl += "@" + percent_encode(version);
  return purl;
}

std::string make_purl(const ExternalPackageRef& ref) {
  std::string purl = "pkg:generic/" + percent_encode(ref.inferred_name);
  if (ref.inferred_version) purl += "@" + percent_encode(*ref.inferred_version);
  purl += "?download_url=" + percent_encode(ref.url, ":/");
  return purl;
}

std::string emit_spdx(std::vector<Package> packages, std::vector<ExternalPackageRef> refs,
                      const SbomInfo& info, int indent) {
  std::sort(packages.begin(), packages.end(), [](const Package& a, const Package& b) {
    if (a.ecosystem != b.ecosystem) return static_cast<int>(a.ecosystem) < static_cast<int>(b.ecosystem);
    if (a.name != b.name) return a.name < b.name;
    return a.version.value_or("") < b.version.value_or("");
  });
  std::sort(refs.begin(), refs.end(), [](const ExternalPackageRef& a, const ExternalPackageRef& b) {
    return a.url < b.url;
  });

  ordered_json doc;
  doc["spdxVersion"] = "SPDX-2.3";
  doc["dataLicense"] = "CC0-1.0";
  doc["SPDXID"] = "SPDXRef-DOCUMENT";
  doc["name"] = info.image_name;
  doc["documentNamespace"] = "https://spdx.org/spdxdocs/" + std::string(kToolName) + "/" +
                             (info.image_digest.empty() ? "unknown" : info.image_digest);
  doc["creationInfo"] = {{"created", info.created}, {"creators", {tool_creator()}}};

  ordered_json spdx_packages = ordered_json::array();
  ordered_json relationships = ordered_json::array();

  const std::string image_id = "SPDXRef-Image";
  {
    ordered_json image;
    image["SPDXID"] = image_id;
    image["name"] = info.image_name;
    if (!info.image_digest.empty()) image["versionInfo"] = "sha256:" + info.image_digest;
    image["downloadLocation"] = "NOASSERTION";
    image["supplier"] = "NOASSERTION";
    image["filesAnalyzed"] = false;
    spdx_packages.push_back(std::move(image));
    relationships.push_back({{"spdxElementId", "SPDXRef-DOCUMENT"},
                             {"relationshipType", "DESCRIBES"},
                             {"relatedSpdxElement", image_id}});
  }

  std::set<std::string> used_ids;
  auto unique_id = [&used_ids](const std::string& base) {
    std::string id = base;
    int n = 1;
    while (!used_ids.insert(id).second) id = base + "-" + std::to_string(n++);
    return id;
  };

  for (const Package& pkg : packages) {
    ordered_json p;
    std::string base = "SPDXRef-Package-" + spdx_id_component(std::string(to_string(pkg.ecosystem))) +
                       "-" + spdx_id_component(pkg.name);
    if (pkg.version) base += "-" + spdx_id_component(*pkg.version);
    const std::string id = unique_id(base);
    p["SPDXID"] = id;
    p["name"] = pkg.name;
    if (pkg.version) p["versionInfo"] = *pkg.version;
    p["downloadLocation"] = "NOASSERTION";
    p["supplier"] = "NOASSERTION";
    p["filesAnalyzed"] = false;
    p["externalRefs"] = ordered_json::array({{{"referenceCategory", "PACKAGE-MANAGER"},
                                              {"referenceType", "purl"},
                                              {"referenceLocator", make_purl(pkg, info.os)}}});
    ordered_json annotations = ordered_json::array();
    annotations.push_back(
        annotation(info.created, "source-layer: " + std::to_string(pkg.source_layer)));
    if (pkg.obscured) annotations.push_back(annotation(info.created, "obscured: true"));
    if (pkg.provenance == Provenance::declared) {
      annotations.push_back(annotation(info.created, "provenance: declared"));
    }
    p["annotations"] = std::move(annotations);
    spdx_packages.push_back(std::move(p));
    relationships.push_back({{"spdxElementId", image_id},
                             {"relationshipType", "CONTAINS"},
                             {"relatedSpdxElement", id}});
  }

  for (const ExternalPackageRef& ref : refs) {
    ordered_json p;
    std::string base = "SPDXRef-Package-external-" + spdx_id_component(ref.inferred_name);
    if (ref.inferred_version) base += "-" + spdx_id_component(*ref.inferred_version);
    const std::string id = unique_id(base);
    p["SPDXID"] = id;
    p["name"] = ref.inferred_name;
    if (ref.inferred_version) p["versionInfo"] = *ref.inferred_version;
    p["downloadLocation"] = ref.url;
    p["supplier"] = "NOASSERTION";
    p["filesAnalyzed"] = false;
    p["externalRefs"] = ordered_json::array({{{"referenceCategory", "PACKAGE-MANAGER"},
                                              {"referenceType", "purl"},
                                              {"referenceLocator", make_purl(ref)}}});
    ordered_json annotations = ordered_json::array();
    if (ref.layer_index) {
      annotations.push_back(
          annotation(info.created, "source-layer: " + std::to_string(*ref.layer_index)));
    }
    annotations.push_back(annotation(info.created, "kind: " + std::string(to_string(ref.kind))));
    p["annotations"] = std::move(annotations);
    spdx_packages.push_back(std::move(p));
    relationships.push_back({{"spdxElementId", image_id},
                             {"relationshipType", "CONTAINS"},
                             {"relatedSpdxElement", id}});
  }

  doc["packages"] = std::move(spdx_packages);
  doc["relationships"] = std::move(relationships);
  return doc.dump(indent) + "\n";
}

}  // namespace strata
