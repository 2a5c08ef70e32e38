#pragma once

#include <cstdint>
#include <functional>

namespace stcausal {

int hardware_threads();

// Process-wide default parallelism degree; the CLI sets this from --threads.
void set_default_threads(int n);
int default_threads();

// Run fn(i) for every i in [0, n); blocks until all complete. Callers obtain
// determinism by writing results into i-indexed slots and reducing in a fixed
// order afterwards — the schedule itself carries no ordering guarantee.
// nthreads == 0 uses the process default. The first exception thrown by any
// task is rethrown after all workers stop.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn,
                  int nthreads = 0);

}  // namespace stcausal
