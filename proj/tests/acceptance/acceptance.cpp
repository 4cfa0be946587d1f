#include <cstdio>
#include <cstdlib>
#include <string>

#include "ionheat/reproduce.hpp"

int main(int argc, char** argv) {
  ionheat::ReproduceOptions options;
  options.data_dir = IONHEAT_DATA_DIR;
  for (int i = 1; i < argc; ++i) options.only.push_back(std::atoi(argv[i]));
  int failed = 0;
  ionheat::run_acceptance(options, [&](const ionheat::CriterionResult& r) {
    std::printf("%s\n", ionheat::format_criterion(r).c_str());
    std::fflush(stdout);
    if (!r.pass) ++failed;
  });
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
