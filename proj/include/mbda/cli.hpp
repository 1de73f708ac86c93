#ifndef MBDA_CLI_HPP
#define MBDA_CLI_HPP

#include "mbda/engine.hpp"
#include "mbda/simgen.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace mbda::cli {

enum ExitCode { kOk = 0, kError = 1, kConvergenceWarning = 2 };

/// Every tunable of a run. Precedence: defaults, then the config file, then
/// command-line flags.
struct Settings {
  RunConfig run;
  GeneratorConfig gen;
  double fdr = 0.05;
  bool qc = true;
  int min_nonzero = 3;
  bool taxa_in_rows = false;
  int replicates = 10;
  std::vector<std::string> methods{"zinb-dpp", "zinb-tss", "zinb-q75", "zinb-rle", "zinb-tmm",
                                   "zinb-css", "dm",       "anova",    "kruskal-wallis"};
  std::string base_counts;

  /// Sets one key; unknown keys and malformed values throw Config.
  void set(const std::string &key, const std::string &value);
  [[nodiscard]] std::map<std::string, std::string> resolved() const;
};

/// Flat key=value lines, '#' comments, blank lines ignored.
void apply_config_file(Settings &settings, const std::filesystem::path &path);
[[nodiscard]] std::string format_resolved(const Settings &settings);

struct Paths {
  std::string counts;
  std::string labels;
  std::string tree;
  std::string out;
  std::string in;
  bool overwrite = false;
  bool progress = false;
};

int cmd_qc(const Settings &s, const Paths &paths, std::ostream &log);
int cmd_normalize(const Settings &s, const Paths &paths, std::ostream &log);
int cmd_simulate(const Settings &s, const Paths &paths, std::ostream &log);
int cmd_fit(const Settings &s, const Paths &paths, std::ostream &log);
int cmd_benchmark(const Settings &s, const Paths &paths, std::ostream &log);
int cmd_report(const Settings &s, const Paths &paths, std::ostream &log);

/// Parses argv, dispatches, and maps exceptions to exit code 1.
int main(int argc, char **argv, std::ostream &out, std::ostream &err);

}  // namespace mbda::cli

#endif
