#pragma once

namespace dopose {

// Selects the kernel implementation. `kSerial` is the single-threaded
// reference path; `kParallel` distributes work with OpenMP. Both produce
// bit-identical results.
enum class Execution { kSerial, kParallel };

}  // namespace dopose
