#include "spheremap/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace spheremap {
namespace {

int default_threads() {
  if (const char* env = std::getenv("SPHEREMAP_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (...) {
    }
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

std::atomic<int> g_override{0};

}  // namespace

int thread_count() {
  static const int base = default_threads();
  const int o = g_override.load(std::memory_order_relaxed);
  return o > 0 ? o : base;
}

void set_thread_count(int n) { g_override.store(n > 0 ? n : 0, std::memory_order_relaxed); }

}  // namespace spheremap
