#pragma once

// Declarations of the zstd stable streaming API, used when no zstd.h is
// installed and the runtime library is linked directly. Layout and
// signatures follow the documented stable interface (unchanged since 1.0).
#if STRATA_HAVE_ZSTD_H
#include <zstd.h>
#else

#include <stddef.h>

extern "C" {

typedef struct ZSTD_DStream_s ZSTD_DStream;

typedef struct {
  const void* src;
  size_t size;
  size_t pos;
} ZSTD_inBuffer;

typedef struct {
  void* dst;
  size_t size;
  size_t pos;
} ZSTD_outBuffer;

ZSTD_DStream* ZSTD_createDStream(void);
size_t ZSTD_freeDStream(ZSTD_DStream* zds);
size_t ZSTD_initDStream(ZSTD_DStream* zds);
size_t ZSTD_decompressStream(ZSTD_DStream* zds, ZSTD_outBuffer* output, ZSTD_inBuffer* input);
unsigned ZSTD_isError(size_t code);
const char* ZSTD_getErrorName(size_t code);
size_t ZSTD_DStreamOutSize(void);

}  // extern "C"

#endif
