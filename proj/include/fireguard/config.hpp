#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "fireguard/simcore.hpp"

namespace fg {

struct GeneratorSpec {
  std::string profile = "default";
  uint64_t seed = 1;
  size_t length = 10000;
};

/// A run as described by a JSON config file.
struct RunConfig {
  std::string label;
  std::optional<std::string> trace_path;
  std::optional<GeneratorSpec> generator;
  std::optional<std::string> truth_path;
  SimConfig sim;
};

/// Parses and validates a JSON run config. Relative paths resolve against
/// `base_dir`. Unknown keys are rejected.
RunConfig parse_run_config(std::string_view json_text, const std::string& base_dir = "");

/// Applies a `key=value` override as used by sweeps (engines, filter_width,
/// fifo_depth, queue_capacity, commit_width, seed, prf_conflict_p, policy, model,
/// isax, unroll, work, loop, hazard).
void apply_override(RunConfig& config, std::string_view key, std::string_view value);

/// Loads the trace the config names, or generates it.
Trace load_run_trace(const RunConfig& config);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view data);

}  // namespace fg
