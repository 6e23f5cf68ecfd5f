#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

namespace soliton {

// Manifest problems; the message carries file:line and the field name.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  std::string out_dir;  // overrides the manifest's "output"
  int jobs = 1;
};

enum ExitCode { kExitPass = 0, kExitNumerical = 1, kExitUsage = 2 };

// Runs one manifest (an object, or an array of objects run as independent entries).
// Always writes summary.json into the output directory.
int run_manifest_file(const std::string& path, const RunOptions& options, std::ostream& log);
int run_manifest_text(const std::string& text, const std::string& source_name, const RunOptions& options,
                      std::ostream& log);

}  // namespace soliton
