// Acceptance run: every named check at its pinned tolerance, one PASS/FAIL
// block per check. Exits nonzero if any check fails.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <iostream>

#include "mmimo/validation.hpp"

int main(int argc, char** argv) {
  mmimo::validation::SuiteOptions options;
  for (int i = 1; i < argc; ++i) options.checks.emplace_back(argv[i]);
  try {
    int failed = 0;
    const auto results = mmimo::validation::run_suite(options, [&](const mmimo::validation::CheckResult& r) {
      if (!r.passed) ++failed;
      std::cout << mmimo::validation::format_result(r) << std::endl;
    });
    std::cout << results.size() - failed << "/" << results.size() << " acceptance checks passed" << std::endl;
    return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
}
