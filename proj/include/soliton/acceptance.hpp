#pragma once

#include <functional>
#include <string>
#include <vector>

namespace soliton {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

constexpr int kCriteria = 13;

// quick shrinks the grids and trial counts of the slow criteria
CriterionResult run_criterion(int id, bool quick = false, int jobs = 1);
std::vector<CriterionResult> run_acceptance(bool quick, int jobs,
                                            const std::function<void(const CriterionResult&)>& on_result = {});
std::string format_result(const CriterionResult& r);

}  // namespace soliton
