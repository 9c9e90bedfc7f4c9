// One line per acceptance criterion; exit status is the number of failures.
#include <iostream>

#include "cimtherm/acceptance.hpp"

int main() {
  int failed = 0;
  cimtherm::run_acceptance({}, [&](const cimtherm::CheckResult& r) {
    std::cout << cimtherm::format_check(r) << std::endl;
    failed += !r.pass;
  });
  std::cout << (failed ? "FAILED: " : "all passed: ") << 11 - failed << "/11" << std::endl;
  return failed;
}
