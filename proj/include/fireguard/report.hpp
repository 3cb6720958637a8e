#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fireguard/config.hpp"
#include "fireguard/simcore.hpp"

namespace fg {

constexpr const char* kMetricsSchema = "fireguard-metrics/1";

/// Configuration facts carried alongside the metrics.
struct RunInfo {
  std::string label;
  unsigned engines = 0;
  unsigned filter_width = 0;
  std::string kernels;  // '+'-joined kernel types
  std::string models;   // '+'-joined programming models
  std::string isax;     // '+'-joined ISAX modes
};

RunInfo describe(const RunConfig& config);

/// Deterministic JSON metrics document.
std::string metrics_to_json(const Metrics& m, const RunInfo& info,
                            const std::optional<LatencyReport>& latency);
std::string csv_header();
std::string csv_row(const Metrics& m, const RunInfo& info);
/// One "V <seq> <CLASS> 0x<pc> <detect_cycle> <latency_ns>" line per verdict.
std::string verdict_log(const Metrics& m);

/// Plot-ready tables over several metrics documents. Throws Error(Config) on
/// schema mismatch.
std::string report_tables(const std::vector<std::string>& documents);

}  // namespace fg
