// Acceptance gate: one line per criterion, "criterion N: PASS/FAIL (details)".
// With --criterion N only that criterion runs and the exit code reflects it;
// with no arguments all ten run and the exit code is the failure count.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>

#include "ldlab/experiments.hpp"

namespace {

int run_one(int criterion) {
  try {
    const auto out = ldlab::experiments::run_criterion(criterion);
    std::printf("criterion %d: %s (%s)\n", criterion,
                out.pass ? "PASS" : "FAIL", out.details.c_str());
    return out.pass ? 0 : 1;
  } catch (const std::exception& e) {
    std::printf("criterion %d: FAIL (threw: %s)\n", criterion, e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  int criterion = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      criterion = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }
  if (criterion != 0) {
    if (criterion < 1 || criterion > 10) {
      std::fprintf(stderr, "criterion must be 1..10\n");
      return 2;
    }
    return run_one(criterion);
  }
  int failures = 0;
  for (int c = 1; c <= 10; ++c) failures += run_one(c);
  return failures;
}
