#include "strata/compress.hpp"

#include <zlib.h>

#include <vector>

#include "strata/error.hpp"
#include "zstd_compat.h"

namespace strata {

namespace {

void inflate_gzip(std::span<const std::byte> input, const ByteSink& sink) {
  z_stream zs{};
  // 15+32: zlib or gzip wrapper, auto-detected
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw Error(Errc::io_error, "inflateInit failed");

  std::vector<std::byte> out(1 << 16);
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<std::byte*>(input.data()));
  zs.avail_in = static_cast<uInt>(input.size());

  int rc = Z_OK;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END && rc != Z_BUF_ERROR) {
      std::string msg = zs.msg != nullptr ? zs.msg : "corrupt deflate stream";
      inflateEnd(&zs);
      throw Error(Errc::io_error, "gzip: " + msg);
    }
    size_t produced = out.size() - zs.avail_out;
    if (produced > 0) sink({out.data(), produced});
    if (rc == Z_STREAM_END && zs.avail_in > 0) {
      // concatenated gzip members
      if (inflateReset2(&zs, 15 + 32) != Z_OK) {
        inflateEnd(&zs);
        throw Error(Errc::io_error, "gzip: reset failed");
      }
      rc = Z_OK;
      continue;
    }
    if (rc == Z_BUF_ERROR && zs.avail_in == 0) {
      inflateEnd(&zs);
      throw Error(Errc::truncated_stream, "gzip stream ends mid-member");
    }
  } while (rc != Z_STREAM_END);

  inflateEnd(&zs);
}

void inflate_zstd(std::span<const std::byte> input, const ByteSink& sink) {
  ZSTD_DStream* ds = ZSTD_createDStream();
  if (ds == nullptr) throw Error(Errc::io_error, "zstd: cannot create stream");
  ZSTD_initDStream(ds);

  std::vector<std::byte> out(ZSTD_DStreamOutSize());
  ZSTD_inBuffer in{input.data(), input.size(), 0};
  size_t rc = 0;
  while (in.pos < in.size) {
    ZSTD_outBuffer ob{out.data(), out.size(), 0};
    rc = ZSTD_decompressStream(ds, &ob, &in);
    if (ZSTD_isError(rc) != 0) {
      std::string msg = ZSTD_getErrorName(rc);
      ZSTD_freeDStream(ds);
      throw Error(Errc::io_error, "zstd: " + msg);
    }
    if (ob.pos > 0) sink({out.data(), ob.pos});
  }
  ZSTD_freeDStream(ds);
  if (rc != 0) throw Error(Errc::truncated_stream, "zstd stream ends mid-frame");
}

}  // namespace

void decompress(Compression codec, std::span<const std::byte> input, const ByteSink& sink) {
  switch (codec) {
    case Compression::none:
      if (!input.empty()) sink(input);
      return;
    case Compression::gzip:
      if (input.empty()) throw Error(Errc::truncated_stream, "empty gzip stream");
      inflate_gzip(input, sink);
      return;
    case Compression::zstd:
      if (input.empty()) throw Error(Errc::truncated_stream, "empty zstd stream");
      inflate_zstd(input, sink);
      return;
  }
}

std::string decompress_to_string(Compression codec, std::string_view input) {
  std::string out;
  decompress(codec, std::as_bytes(std::span<const char>(input.data(), input.size())),
             [&out](std::span<const std::byte> chunk) {
               out.append(reinterpret_cast<const char*>(chunk.data()), chunk.size());
             });
  return out;
}

}  // namespace strata
