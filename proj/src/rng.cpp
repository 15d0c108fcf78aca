#include "sddlab/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sddlab {
namespace {
int g_default_workers = 0;
}

void set_worker_limit(int workers) {
#ifdef _OPENMP
  if (g_default_workers == 0) g_default_workers = omp_get_max_threads();
  omp_set_num_threads(workers > 0 ? workers : g_default_workers);
#else
  (void)workers;
#endif
}

int worker_limit() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace sddlab
