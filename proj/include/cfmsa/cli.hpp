#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "cfmsa/counterfactual.hpp"
#include "cfmsa/data.hpp"
#include "cfmsa/gradcheck.hpp"
#include "cfmsa/trainer.hpp"

namespace cfmsa {

enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitUsage = 2 };

// Fully resolved settings for one subcommand: defaults, then the --config
// file, then flags.
struct RunConfig {
  std::string command;
  std::vector<std::string> data;
  std::string out;
  std::string checkpoint;
  std::string record_id;
  std::vector<InferenceMode> modes{kAllModes.begin(), kAllModes.end()};
  bool timestamp = true;
  TrainConfig train;
  SyntheticConfig synthetic;
  GradCheckOptions gradcheck;
};

nlohmann::ordered_json run_config_to_json(const RunConfig& cfg);

// Entry point of the cfmsa executable. Returns the process exit code.
int run_cli(int argc, char** argv, std::istream& in, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err);

}  // namespace cfmsa
