#pragma once

#include <iosfwd>

namespace sagin {

// Entry point of the sagin command-line tool. Returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Keeps the training loop's large short-lived buffers on the heap instead of
// fresh mmap regions. No-op outside glibc.
void tune_allocator();

}  // namespace sagin
