#include <cstdlib>
#include <iostream>

#include "checks.hpp"

int main(int argc, char** argv) {
  ulpsolve::checks::Context ctx;
  ctx.corpus_dir = argc > 1 ? argv[1] : ULPSOLVE_CORPUS_DIR;
  const int failures = ulpsolve::checks::run_and_report(ulpsolve::checks::all(), ctx, std::cout);
  std::cout << (failures == 0 ? "all checks passed" : std::to_string(failures) + " check(s) failed") << std::endl;
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
