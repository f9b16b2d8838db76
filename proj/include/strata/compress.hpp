#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>

namespace strata {

enum class Compression { none, gzip, zstd };

using ByteSink = std::function<void(std::span<const std::byte>)>;

/// Streams the decompressed form of `input` into `sink` in chunks.
/// Throws Error(truncated_stream) on short input, Error(io_error) on
/// corrupt data.
void decompress(Compression codec, std::span<const std::byte> input, const ByteSink& sink);

std::string decompress_to_string(Compression codec, std::string_view input);

}  // namespace strata
