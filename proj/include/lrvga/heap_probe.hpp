#pragma once

// Process-wide heap accounting. The counters are only live when the
// `lrvga_heap_probe` object library is linked into the executable; otherwise
// active() is false and every query returns -1.

namespace lrvga::heap {

bool active();
long current_bytes();
long peak_bytes();
// Largest single request since the last reset.
long largest_allocation();
// Peak restarts at the current level; largest restarts at 0.
void reset_peak();

}  // namespace lrvga::heap
