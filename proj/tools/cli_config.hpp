#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "fluxmod/dephasing.hpp"
#include "fluxmod/noise.hpp"
#include "fluxmod/transmon.hpp"
#include "fluxmod/twoqubit.hpp"

namespace fluxmod::cli {

using Json = nlohmann::json;

/// Every key the CLI understands, with its default value. Keys carry their
/// unit as a suffix; frequencies are plain Hz and fluxes are in Phi0.
Json default_config();

/// Recursively overlays `patch` onto `base`. Keys absent from `base` are
/// rejected with ConfigError, as are type mismatches between leaves.
void merge_strict(Json& base, const Json& patch, const std::string& where);

/// Applies "section.key=value". The value is parsed as JSON when possible
/// and taken as a string otherwise.
void apply_assignment(Json& cfg, const std::string& assignment);

/// Final checks on the merged document; throws ConfigError.
void validate_config(const Json& cfg);

/// Reads a JSON file; throws ConfigError on I/O or parse failure.
Json load_json_file(const std::string& path);

// Typed views of the resolved document.

/// Either the "band" or the "params" block of a device section.
transmon::TransmonParams device_params(const Json& device);
noise::NoiseSpec noise_spec(const Json& noise);
/// White budgets map dt_s onto the fine white-noise step (0 = automatic).
dephasing::McBudget mc_budget(const Json& block, bool white, int n_times,
                              int threads);
twoqubit::TwoQubitSystem two_qubit_system(const Json& tq);
twoqubit::Gate parse_gate(const std::string& name);

/// Grid from {prefix}_min_phi0, {prefix}_max_phi0 and n_points, or from an
/// explicit {prefix}_list_phi0 when that list is non-empty.
std::vector<double> flux_grid(const Json& block, const std::string& prefix);

}  // namespace fluxmod::cli
