#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "subreg/problems.hpp"

namespace subreg {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr std::string_view kVersion = "1.0.0";

enum ExitCode : int { ExitOk = 0, ExitUserError = 2, ExitNumerical = 3 };

/// Exit code for a library error kind.
int exit_code_for(ErrorKind kind);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string config_hash(const nlohmann::json& config);

/// Checks a command config against its schema and fills defaults. Throws
/// ConfigError for unknown commands, unknown keys, missing or mistyped values.
nlohmann::json validate_config(std::string_view command, const nlohmann::json& config);

/// Applies `--key value` pairs to top-level scalar keys.
void apply_overrides(std::string_view command, nlohmann::json& config, const std::vector<std::string>& extras);

struct GenOptions {
    DatasetOptions dataset;
    BurgersOptions burgers;
    Index n_shapes = 10;  // control inputs and outputs
};

/// Any preset: eigen datasets, Burgers with local POD targets, control with
/// balanced-truncation targets.
SubspaceDataset generate_dataset(const GenOptions& opts);

/// Control system stored in sample `s` of a control dataset. Channels are
/// k, phi0, b, then the input and observation shapes.
HeatControlSystem control_system_of(const SubspaceDataset& ds, Index s);

/// `subreg <command> --config <path> [--out <dir>] [--seed <u64>] [--key value...]`.
/// Data goes to files (and stdout for report); logs and errors to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace subreg
