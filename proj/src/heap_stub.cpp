#include "lrvga/heap_probe.hpp"

// Fallbacks for executables built without the probe.
namespace lrvga::heap {

__attribute__((weak)) bool active() { return false; }
__attribute__((weak)) long current_bytes() { return -1; }
__attribute__((weak)) long peak_bytes() { return -1; }
__attribute__((weak)) long largest_allocation() { return -1; }
__attribute__((weak)) void reset_peak() {}

}  // namespace lrvga::heap
