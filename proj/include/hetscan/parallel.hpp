#pragma once

namespace hetscan {

enum class Execution { Serial, Parallel };

/// Applies the HETSCAN_THREADS cap (if set and positive) to the OpenMP
/// runtime. Returns the resulting maximum thread count.
int configure_threads_from_env();

int max_threads();

}  // namespace hetscan
