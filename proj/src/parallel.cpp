#include "dissipnet/parallel.hpp"

#include <omp.h>

namespace dissipnet {

int worker_count() { return omp_get_max_threads(); }

}  // namespace dissipnet
