#include <cstdio>

#include "mirrorflow/acceptance.hpp"

int main() {
  using namespace mirrorflow::acceptance;
  const auto rs = run(Options{}, [](const CriterionResult& r) {
    std::printf("%s\n", format(r).c_str());
    std::fflush(stdout);
  });
  return all_passed(rs) ? 0 : 1;
}
