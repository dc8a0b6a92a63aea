// SPDX-License-Identifier: Apache-2.0

#include <malloc.h>

#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  // Batch matrices are a few hundred KiB and churn every update; keep them on the heap
  // instead of round-tripping through mmap.
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  return pebble::cli::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
