#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace pgait {

/// Training allocates and frees many large, short-lived activation buffers.
/// With glibc's defaults each one is a fresh mmap that the kernel has to
/// zero, so keep them on the heap instead. No-op on other C libraries.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace pgait
