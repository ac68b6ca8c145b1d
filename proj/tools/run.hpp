#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bvflow::cli {

enum ExitCode : int { ok = 0, config_error = 1, numerical_failure = 2 };

const std::vector<std::string>& subcommands();

/// Loads the config, applies overrides, runs one subcommand and writes its
/// artifacts plus MANIFEST into `output_dir` (default "bvflow_out").
/// Failures are reported on `log` and in diagnostic.txt.
int run(const std::string& subcommand, const std::string& config_path, const std::vector<std::string>& overrides,
        std::ostream& log);

}  // namespace bvflow::cli
