#pragma once

#include <functional>

namespace lvmi {

// Number of workers to use: explicit request, else LVMI_WORKERS env var,
// else hardware concurrency.
int resolve_workers(int requested);

// Fixed chunk size used everywhere; chunk boundaries (and therefore every
// floating-point reduction order) are independent of the worker count.
inline constexpr int kChunkSize = 32;

inline int chunk_count(int n_items) { return (n_items + kChunkSize - 1) / kChunkSize; }

// Runs fn(worker, chunk_index, begin, end) over [0, n_items) split into
// fixed-size chunks, distributed across workers via an atomic cursor.
// worker in [0, workers) identifies the executing thread, so callers can
// hand out per-worker scratch. fn must only write to worker-, chunk- or
// item-indexed slots. Exceptions are captured and the first one (by chunk
// index) is rethrown on the caller thread.
void parallel_chunks(int n_items, int workers,
                     const std::function<void(int, int, int, int)>& fn);

}  // namespace lvmi
