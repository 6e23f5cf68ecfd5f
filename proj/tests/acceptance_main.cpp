#include <cstdlib>
#include <iostream>
#include <string>

#include "soliton/acceptance.hpp"

// acceptance [--quick] [--jobs N] [id ...]; one line per criterion, exit 1 if any failed
int main(int argc, char** argv) {
  bool quick = false;
  int jobs = 1;
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--quick") {
      quick = true;
    } else if (a == "--jobs" && i + 1 < argc) {
      jobs = std::atoi(argv[++i]);
    } else {
      int id = std::atoi(a.c_str());
      if (id < 1 || id > soliton::kCriteria) {
        std::cerr << "bad criterion '" << a << "'\n";
        return 2;
      }
      ids.push_back(id);
    }
  }
  bool ok = true;
  auto print = [&](const soliton::CriterionResult& r) {
    std::cout << soliton::format_result(r) << std::endl;
    ok = ok && r.passed;
  };
  if (ids.empty())
    soliton::run_acceptance(quick, jobs, print);
  else
    for (int id : ids) print(soliton::run_criterion(id, quick, jobs));
  return ok ? 0 : 1;
}
