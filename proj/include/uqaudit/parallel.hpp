#pragma once

#include <cstddef>
#include <functional>

// Deterministic fork-join helper. Tasks write to pre-assigned slots, so the
// result is identical for any worker count; only wall time changes.

namespace uqaudit {

// Effective worker count: the explicit override if set, else UQAUDIT_THREADS,
// else hardware concurrency. 0 means "auto" at every level.
int worker_count();

// Programmatic override (CLI --threads). 0 restores auto.
void set_worker_count(int n);

// Runs fn(i) for i in [0, n). Blocks until all tasks complete. The first
// exception thrown by a task is rethrown in the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace uqaudit
