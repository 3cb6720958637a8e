#include "fireguard/report.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <map>

#include <json.hpp>

namespace fg {

using ojson = nlohmann::ordered_json;

RunInfo describe(const RunConfig& rc) {
  RunInfo info;
  info.label = rc.label;
  info.engines = rc.sim.engines;
  info.filter_width = rc.sim.filter_width;
  auto join = [](std::string& out, std::string_view s) {
    if (!out.empty()) out += '+';
    out += s;
  };
  for (const auto& k : rc.sim.kernels) {
    join(info.kernels, to_string(k.type));
    join(info.models, k.cost.accelerator ? "accel" : to_string(k.cost.model));
    join(info.isax, to_string(k.cost.isax));
  }
  if (info.kernels.empty()) info.kernels = "none";
  if (info.models.empty()) info.models = "none";
  if (info.isax.empty()) info.isax = "none";
  return info;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double frac(uint64_t a, uint64_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); }

}  // namespace

std::string metrics_to_json(const Metrics& m, const RunInfo& info,
                            const std::optional<LatencyReport>& latency) {
  ojson j;
  j["schema"] = kMetricsSchema;
  j["label"] = info.label;
  j["config"] = {{"engines", info.engines},
                 {"filter_width", info.filter_width},
                 {"kernels", info.kernels},
                 {"models", info.models},
                 {"isax", info.isax}};
  j["records"] = m.records;
  j["baseline_cycles"] = m.baseline_cycles;
  j["stalled_cycles"] = m.stalled_cycles;
  j["slowdown"] = m.slowdown();
  ojson stalls = ojson::object();
  for (unsigned c = 0; c < kNumStallCauses; ++c) stalls[std::string(to_string(StallCause(c)))] = m.stalls[c];
  j["stalls"] = stalls;
  const uint64_t core = m.baseline_cycles + m.stalled_cycles;
  ojson sf = ojson::object();
  for (unsigned c = 0; c < kNumStallCauses; ++c) {
    sf[std::string(to_string(StallCause(c)))] = frac(m.stalls[c], core);
  }
  j["stall_fraction"] = sf;
  j["mq_full_slow_cycles"] = m.mq_full_slow_cycles;
  j["fast_cycles"] = m.fast_cycles;
  j["slow_cycles"] = m.slow_cycles;
  j["queue_full_fraction"] = {{"fifo", frac(m.fifo_full_cycles, m.fast_cycles)},
                              {"cdc", frac(m.cdc_full_cycles, m.fast_cycles)}};
  j["counters"] = {{"sensitive", m.sensitive},       {"multicasts", m.multicasts},
                   {"delivered_entries", m.delivered_entries}, {"consumed", m.consumed},
                   {"no_subscriber", m.no_subscriber}, {"mesh_injected", m.mesh_injected},
                   {"mesh_delivered", m.mesh_delivered}, {"mesh_flit_moves", m.mesh_flit_moves}};
  j["cycles_per_packet"] = m.cycles_per_packet();
  ojson engines = ojson::array();
  for (size_t i = 0; i < m.engines.size(); ++i) {
    const EngineMetrics& e = m.engines[i];
    // Trailing zero buckets are dropped to keep documents short.
    std::vector<uint64_t> hist = e.occupancy;
    while (hist.size() > 1 && hist.back() == 0) hist.pop_back();
    engines.push_back({{"index", i},
                       {"consumed", e.consumed},
                       {"messages", e.messages},
                       {"busy_cycles", e.busy_cycles},
                       {"idle_polls", e.idle_polls},
                       {"queue_empty", e.queue_empty},
                       {"push_stalls", e.push_stalls},
                       {"wait_cycles", e.wait_cycles},
                       {"queue_full_fraction", frac(e.full_cycles, m.slow_cycles)},
                       {"occupancy", hist}});
  }
  j["engines"] = engines;
  ojson verdicts = ojson::array();
  for (const auto& v : m.verdicts) {
    verdicts.push_back({{"seq", v.verdict.seq},
                        {"class", std::string(to_string(v.verdict.cls))},
                        {"pc", v.verdict.pc},
                        {"engine", v.verdict.engine},
                        {"kernel", v.verdict.kernel},
                        {"detect_cycle", v.verdict.detect_cycle},
                        {"commit_cycle", v.commit_cycle},
                        {"latency_cycles", v.latency_cycles},
                        {"latency_ns", v.latency_ns}});
  }
  j["verdicts"] = verdicts;
  if (latency) {
    ojson entries = ojson::array();
    for (const auto& e : latency->entries) {
      ojson x = {{"seq", e.truth.seq},
                 {"class", std::string(to_string(e.truth.expected))},
                 {"detected", e.detected}};
      if (e.detected) {
        x["latency_cycles"] = e.latency_cycles;
        x["latency_ns"] = e.latency_ns;
      }
      entries.push_back(x);
    }
    j["latency"] = {{"attacks", latency->entries.size()},
                    {"misses", latency->misses},
                    {"min_ns", latency->min_ns},
                    {"median_ns", latency->median_ns},
                    {"max_ns", latency->max_ns},
                    {"entries", entries}};
  } else {
    j["latency"] = nullptr;
  }
  return j.dump(2) + "\n";
}

std::string csv_header() {
  return "label,engines,filter_width,kernels,models,slowdown,stalled,baseline,filter_full,fifo_full,"
         "cdc_full,prf_conflict,cycles_per_packet,verdicts\n";
}

std::string csv_row(const Metrics& m, const RunInfo& info) {
  std::string s = info.label + "," + std::to_string(info.engines) + "," +
                  std::to_string(info.filter_width) + "," + info.kernels + "," + info.models + "," +
                  fmt("%.6f", m.slowdown()) + "," + std::to_string(m.stalled_cycles) + "," +
                  std::to_string(m.baseline_cycles);
  for (unsigned c = 0; c < kNumStallCauses; ++c) s += "," + std::to_string(m.stalls[c]);
  s += "," + fmt("%.4f", m.cycles_per_packet()) + "," + std::to_string(m.verdicts.size()) + "\n";
  return s;
}

std::string verdict_log(const Metrics& m) {
  std::string out;
  char buf[160];
  for (const auto& v : m.verdicts) {
    std::snprintf(buf, sizeof buf, "V %" PRIu64 " %s 0x%" PRIx64 " %" PRIu64 " %.3f\n", v.verdict.seq,
                  std::string(to_string(v.verdict.cls)).c_str(), v.verdict.pc, v.verdict.detect_cycle,
                  v.latency_ns);
    out += buf;
  }
  return out;
}

namespace {

struct Doc {
  std::string label;
  uint64_t engines = 0;
  uint64_t filter_width = 0;
  std::string kernels;
  std::string models;
  double slowdown = 0;
  double cpp = 0;
  std::map<std::string, double> stall_fraction;
  ojson latency;
};

Doc load_doc(const std::string& text, size_t index) {
  const std::string where = "metrics document " + std::to_string(index);
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorKind::Config, where + " is not JSON: " + e.what());
  }
  if (!j.is_object() || !j.contains("schema") || j["schema"] != kMetricsSchema) {
    fail(ErrorKind::Config, where + " has schema " +
                                (j.is_object() && j.contains("schema") ? j["schema"].dump() : "none") +
                                ", expected \"" + kMetricsSchema + "\"");
  }
  try {
    Doc d;
    d.label = j.at("label").get<std::string>();
    const auto& c = j.at("config");
    d.engines = c.at("engines").get<uint64_t>();
    d.filter_width = c.at("filter_width").get<uint64_t>();
    d.kernels = c.at("kernels").get<std::string>();
    d.models = c.at("models").get<std::string>();
    d.slowdown = j.at("slowdown").get<double>();
    d.cpp = j.at("cycles_per_packet").get<double>();
    for (auto it = j.at("stall_fraction").begin(); it != j.at("stall_fraction").end(); ++it) {
      d.stall_fraction[it.key()] = it.value().get<double>();
    }
    d.latency = j.at("latency");
    return d;
  } catch (const ojson::exception& e) {
    fail(ErrorKind::Config, where + " does not match " + kMetricsSchema + ": " + e.what());
  }
}

}  // namespace

std::string report_tables(const std::vector<std::string>& documents) {
  if (documents.empty()) fail(ErrorKind::Config, "report needs at least one metrics document");
  std::vector<Doc> docs;
  for (size_t i = 0; i < documents.size(); ++i) docs.push_back(load_doc(documents[i], i));

  auto by = [&](auto key) {
    std::vector<const Doc*> v;
    for (const auto& d : docs) v.push_back(&d);
    std::stable_sort(v.begin(), v.end(), [&](const Doc* a, const Doc* b) { return key(*a) < key(*b); });
    return v;
  };

  std::string out = "# slowdown\nengines,kernel,label,slowdown\n";
  for (const Doc* d : by([](const Doc& d) { return d.engines; })) {
    out += std::to_string(d->engines) + "," + d->kernels + "," + d->label + "," +
           fmt("%.6f", d->slowdown) + "\n";
  }
  out += "\n# stall_fraction\nfilter_width,label";
  for (unsigned c = 0; c < kNumStallCauses; ++c) out += "," + std::string(to_string(StallCause(c)));
  out += "\n";
  for (const Doc* d : by([](const Doc& d) { return d.filter_width; })) {
    out += std::to_string(d->filter_width) + "," + d->label;
    for (unsigned c = 0; c < kNumStallCauses; ++c) {
      auto it = d->stall_fraction.find(std::string(to_string(StallCause(c))));
      out += "," + fmt("%.6f", it == d->stall_fraction.end() ? 0.0 : it->second);
    }
    out += "\n";
  }
  out += "\n# programming_model\nmodel,label,cycles_per_packet\n";
  for (const Doc* d : by([](const Doc& d) { return d.models; })) {
    out += d->models + "," + d->label + "," + fmt("%.4f", d->cpp) + "\n";
  }
  out += "\n# latency\nlabel,attacks,misses,min_ns,median_ns,max_ns\n";
  size_t rows = 0;
  for (const auto& d : docs) {
    if (d.latency.is_null() || d.latency.value("attacks", 0) == 0) continue;
    out += d.label + "," + std::to_string(d.latency.value("attacks", 0)) + "," +
           std::to_string(d.latency.value("misses", 0)) + "," +
           fmt("%.3f", d.latency.value("min_ns", 0.0)) + "," +
           fmt("%.3f", d.latency.value("median_ns", 0.0)) + "," +
           fmt("%.3f", d.latency.value("max_ns", 0.0)) + "\n";
    ++rows;
  }
  if (rows == 0) out += "# no attacks in the inputs\n";
  return out;
}

}  // namespace fg
