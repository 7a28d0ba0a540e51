#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cli_config.hpp"

namespace fluxmod::cli {

/// Subcommand names in the order they are listed by --help.
const std::vector<std::string>& command_names();

/// Runs one subcommand against a resolved configuration and writes its
/// artifacts into `out`. Returns the list of files written.
std::vector<std::string> run_command(const std::string& name, const Json& cfg,
                                     const std::filesystem::path& out);

}  // namespace fluxmod::cli
