#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace ionheat {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct ReproduceOptions {
  std::filesystem::path data_dir;  // holds the bundled layouts and bundled.cfg
  int threads = 0;                 // 0: hardware concurrency
  std::vector<int> only;           // empty: all criteria
};

inline constexpr int kCriterionCount = 10;

CriterionResult run_criterion(int id, const ReproduceOptions& options);
std::vector<CriterionResult> run_acceptance(const ReproduceOptions& options,
                                            const std::function<void(const CriterionResult&)>& on_result = {});

// "criterion 3 PASS  title: detail [seconds]"
std::string format_criterion(const CriterionResult& r);
// criterion,title,result,detail without timings, so identical runs give identical files.
void write_acceptance_csv(std::ostream& out, const std::vector<CriterionResult>& results);

}  // namespace ionheat
