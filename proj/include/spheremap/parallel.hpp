#pragma once

namespace spheremap {

/// Number of worker threads used by the parallel kernels.
///
/// Reads SPHEREMAP_THREADS on first use; falls back to the OpenMP default.
int thread_count();

/// Override the thread cap for the current process (0 restores the default).
void set_thread_count(int n);

}  // namespace spheremap
