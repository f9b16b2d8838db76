#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace strata {

/// Normalizes a tar member path to the canonical absolute form used across
/// the analysis: leading "/", no "./" or "//" segments, no trailing "/"
/// (except the root itself). "." segments are dropped, ".." segments are
/// resolved lexically. Returns nullopt when the path resolves outside the
/// filesystem root or normalizes to nothing.
std::optional<std::string> normalize_tar_path(std::string_view member);

/// Basename of a normalized path ("/" -> "").
std::string_view basename_of(std::string_view path);

/// Parent of a normalized path ("/a" -> "/", "/" -> "/").
std::string_view parent_of(std::string_view path);

/// True when `path` is strictly under directory `dir` (both normalized).
bool is_under(std::string_view dir, std::string_view path);

constexpr std::string_view kWhiteoutPrefix = ".wh.";
constexpr std::string_view kOpaqueWhiteout = ".wh..wh..opq";

bool is_opaque_whiteout_name(std::string_view basename);
bool is_whiteout_name(std::string_view basename);

/// "/etc/.wh.os-release" -> "/etc/os-release".
std::string whiteout_target(std::string_view normalized_path);

}  // namespace strata
