#include <malloc.h>

#include "freqpatch/cli/cli.hpp"

int main(int argc, char** argv) {
  // Large per-image buffers otherwise go through mmap/munmap on every call.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
  return freqpatch::cli::run_cli(argc, argv);
}
