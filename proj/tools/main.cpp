#include <iostream>

#include "CLI11.hpp"
#include "soliton/acceptance.hpp"
#include "soliton/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"translating spacelike soliton lab"};
  app.require_subcommand(1);

  std::string manifest;
  soliton::RunOptions opt;
  auto* run = app.add_subcommand("run", "run a JSON manifest");
  run->add_option("manifest", manifest, "manifest file")->required();
  run->add_option("--out", opt.out_dir, "output directory (overrides the manifest)");
  run->add_option("--jobs", opt.jobs, "worker threads")->check(CLI::Range(1, 256));

  bool quick = false;
  int jobs = 1;
  std::vector<int> ids;
  auto* acc = app.add_subcommand("acceptance", "run the acceptance criteria");
  acc->add_flag("--quick", quick, "coarser grids, fewer trials");
  acc->add_option("--jobs", jobs, "worker threads")->check(CLI::Range(1, 256));
  acc->add_option("--criterion", ids, "only these criteria")->check(CLI::Range(1, soliton::kCriteria));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : soliton::kExitUsage;
  }

  if (*run) return soliton::run_manifest_file(manifest, opt, std::cerr);

  bool all = true;
  auto report = [&](const soliton::CriterionResult& r) {
    std::cout << soliton::format_result(r) << std::endl;
    all = all && r.passed;
  };
  if (ids.empty()) {
    soliton::run_acceptance(quick, jobs, report);
  } else {
    for (int id : ids) report(soliton::run_criterion(id, quick, jobs));
  }
  return all ? soliton::kExitPass : soliton::kExitNumerical;
}
