#include "fireguard/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fg {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorKind::Io, "error reading '" + path + "'");
  return ss.str();
}

void write_file(const std::string& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path + "'");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) fail(ErrorKind::Io, "error writing '" + path + "'");
}

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  fail(ErrorKind::Config, where + ": " + what);
}

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) bad(where, "expected an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) bad(where, "unknown key '" + it.key() + "'");
  }
}

template <class T>
void get(const json& j, const char* key, T& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw std::invalid_argument("expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw std::invalid_argument("expected an integer");
      if (it->is_number_unsigned() || it->template get<int64_t>() >= 0) {
        if constexpr (std::is_unsigned_v<T>) {
          uint64_t v = it->template get<uint64_t>();
          if (v > std::numeric_limits<T>::max()) throw std::invalid_argument("value too large");
        }
      } else if constexpr (std::is_unsigned_v<T>) {
        throw std::invalid_argument("must not be negative");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw std::invalid_argument("expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw std::invalid_argument("expected a string");
    }
    out = it->template get<T>();
  } catch (const std::exception& e) {
    bad(where + "." + key, e.what());
  }
}

std::string resolve(const std::string& base, const std::string& p) {
  if (base.empty() || std::filesystem::path(p).is_absolute()) return p;
  return (std::filesystem::path(base) / p).string();
}

template <class T>
std::vector<T> int_list(const json& j, const char* key, const std::string& where) {
  std::vector<T> out;
  auto it = j.find(key);
  if (it == j.end()) return out;
  if (!it->is_array()) bad(where + "." + key, "expected an array");
  for (const auto& v : *it) {
    if (!v.is_number_unsigned() || v.get<uint64_t>() > std::numeric_limits<T>::max()) {
      bad(where + "." + key, "entries must be small non-negative integers");
    }
    out.push_back(static_cast<T>(v.get<uint64_t>()));
  }
  return out;
}

KernelConfig parse_kernel(const json& j, const std::string& where) {
  only_keys(j, where,
            {"type", "engines", "gids", "broadcast_gids", "policy", "fixed_target", "model", "isax",
             "hazard", "work", "loop", "unroll", "accelerator", "strict", "redzone",
             "quarantine_budget", "spill_threshold", "recall_batch", "window", "bounds"});
  KernelConfig k;
  std::string s;
  if (!j.contains("type")) bad(where, "missing 'type'");
  get(j, "type", s, where);
  k.type = kernel_type_from_string(s);
  k.policy = default_policy(k.type);
  k.engines = int_list<unsigned>(j, "engines", where);
  k.gids = int_list<uint8_t>(j, "gids", where);
  k.broadcast_gids = int_list<uint8_t>(j, "broadcast_gids", where);
  if (j.contains("policy")) {
    get(j, "policy", s, where);
    k.policy = policy_from_string(s);
  }
  get(j, "fixed_target", k.fixed_target, where);
  if (k.policy == Policy::Fixed && !j.contains("fixed_target") && !k.engines.empty()) {
    k.fixed_target = k.engines.front();
  }
  if (j.contains("model")) {
    get(j, "model", s, where);
    k.cost.model = model_from_string(s);
  }
  if (j.contains("isax")) {
    get(j, "isax", s, where);
    k.cost.isax = isax_from_string(s);
  }
  get(j, "hazard", k.cost.hazard, where);
  get(j, "work", k.cost.work, where);
  get(j, "loop", k.cost.loop, where);
  get(j, "unroll", k.cost.unroll, where);
  get(j, "accelerator", k.cost.accelerator, where);
  get(j, "strict", k.params.asan_strict, where);
  get(j, "redzone", k.params.redzone, where);
  get(j, "quarantine_budget", k.params.quarantine_budget, where);
  get(j, "spill_threshold", k.params.spill_threshold, where);
  get(j, "recall_batch", k.params.recall_batch, where);
  get(j, "window", k.params.pmc.window, where);
  if (auto it = j.find("bounds"); it != j.end()) {
    if (!it->is_object()) bad(where + ".bounds", "expected an object keyed by kind");
    for (auto b = it->begin(); b != it->end(); ++b) {
      auto kind = kind_from_string(b.key());
      if (!kind) bad(where + ".bounds", "unknown kind '" + b.key() + "'");
      const std::string w = where + ".bounds." + b.key();
      only_keys(*b, w, {"lo", "hi"});
      CounterBound cb;
      get(*b, "lo", cb.lo, w);
      get(*b, "hi", cb.hi, w);
      k.params.pmc.bounds[static_cast<unsigned>(*kind)] = cb;
    }
  }
  return k;
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Config, std::string("config is not valid JSON: ") + e.what());
  }
  const std::string w = "config";
  only_keys(j, w,
            {"label", "trace", "generator", "truth", "commit_width", "filter_width", "fifo_depth",
             "engines", "queue_capacity", "block_full_threshold", "skip_cost_cycles", "clock", "mesh", "seed", "prf_conflict_p", "max_gids",
             "filter_table", "deadlock_cycles", "kernels"});
  RunConfig rc;
  SimConfig& c = rc.sim;
  get(j, "label", rc.label, w);
  if (j.contains("trace")) {
    std::string p;
    get(j, "trace", p, w);
    rc.trace_path = resolve(base_dir, p);
  }
  if (auto it = j.find("generator"); it != j.end()) {
    only_keys(*it, w + ".generator", {"profile", "seed", "length"});
    GeneratorSpec g;
    get(*it, "profile", g.profile, w + ".generator");
    get(*it, "seed", g.seed, w + ".generator");
    get(*it, "length", g.length, w + ".generator");
    profile_by_name(g.profile);
    rc.generator = g;
  }
  if (rc.trace_path && rc.generator) bad(w, "give either 'trace' or 'generator', not both");
  if (j.contains("truth")) {
    std::string p;
    get(j, "truth", p, w);
    rc.truth_path = resolve(base_dir, p);
  }
  get(j, "commit_width", c.commit_width, w);
  get(j, "filter_width", c.filter_width, w);
  get(j, "fifo_depth", c.fifo_depth, w);
  get(j, "engines", c.engines, w);
  get(j, "queue_capacity", c.queue_capacity, w);
  get(j, "block_full_threshold", c.block_full_threshold, w);
  get(j, "skip_cost_cycles", c.skip_cost_cycles, w);
  get(j, "seed", c.seed, w);
  get(j, "prf_conflict_p", c.prf_conflict_p, w);
  get(j, "max_gids", c.max_gids, w);
  get(j, "deadlock_cycles", c.deadlock_cycles, w);
  if (auto it = j.find("clock"); it != j.end()) {
    only_keys(*it, w + ".clock", {"fast_hz", "slow_hz", "cdc_depth", "cdc_drain_per_slow"});
    get(*it, "fast_hz", c.clock.fast_hz, w + ".clock");
    get(*it, "slow_hz", c.clock.slow_hz, w + ".clock");
    get(*it, "cdc_depth", c.clock.cdc_depth, w + ".clock");
    get(*it, "cdc_drain_per_slow", c.clock.cdc_drain_per_slow, w + ".clock");
  }
  if (auto it = j.find("mesh"); it != j.end()) {
    only_keys(*it, w + ".mesh", {"width", "height", "port_depth"});
    get(*it, "width", c.mesh_width, w + ".mesh");
    get(*it, "height", c.mesh_height, w + ".mesh");
    get(*it, "port_depth", c.port_depth, w + ".mesh");
  }
  if (j.contains("filter_table")) {
    std::string p;
    get(j, "filter_table", p, w);
    c.filter_table = parse_filter_table(read_file(resolve(base_dir, p)), c.max_gids);
  }
  if (auto it = j.find("kernels"); it != j.end()) {
    if (!it->is_array()) bad(w + ".kernels", "expected an array");
    for (size_t i = 0; i < it->size(); ++i) {
      c.kernels.push_back(parse_kernel((*it)[i], w + ".kernels[" + std::to_string(i) + "]"));
    }
  }
  validate(c);
  return rc;
}

namespace {

template <class T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    fail(ErrorKind::Config, "bad value '" + std::string(v) + "' for " + std::string(key));
  }
  return out;
}

}  // namespace

void apply_override(RunConfig& rc, std::string_view key, std::string_view value) {
  SimConfig& c = rc.sim;
  if (key == "engines") {
    c.engines = parse_number<unsigned>(key, value);
    if (c.mesh_width > 0 && static_cast<unsigned>(c.mesh_width * c.mesh_height) < c.engines) {
      c.mesh_width = c.mesh_height = 0;
    }
    for (size_t i = 0; i < c.kernels.size(); ++i) {
      KernelConfig& k = c.kernels[i];
      if (k.engines.empty()) continue;
      std::erase_if(k.engines, [&](unsigned e) { return e >= c.engines; });
      if (k.engines.empty()) {
        fail(ErrorKind::Config, "engines=" + std::string(value) + " leaves kernel " +
                                    std::to_string(i) + " without engines");
      }
      if (k.fixed_target >= c.engines) k.fixed_target = k.engines.front();
    }
  } else if (key == "filter_width") {
    c.filter_width = parse_number<unsigned>(key, value);
  } else if (key == "fifo_depth") {
    c.fifo_depth = parse_number<size_t>(key, value);
  } else if (key == "queue_capacity") {
    c.queue_capacity = parse_number<size_t>(key, value);
  } else if (key == "commit_width") {
    c.commit_width = parse_number<unsigned>(key, value);
  } else if (key == "seed") {
    c.seed = parse_number<uint64_t>(key, value);
  } else if (key == "prf_conflict_p") {
    c.prf_conflict_p = parse_number<double>(key, value);
  } else if (key == "policy") {
    for (auto& k : c.kernels) k.policy = policy_from_string(value);
  } else if (key == "model") {
    for (auto& k : c.kernels) k.cost.model = model_from_string(value);
  } else if (key == "isax") {
    for (auto& k : c.kernels) k.cost.isax = isax_from_string(value);
  } else if (key == "unroll" || key == "work" || key == "loop" || key == "hazard") {
    const auto v = parse_number<uint64_t>(key, value);
    for (auto& k : c.kernels) {
      if (key == "unroll") k.cost.unroll = static_cast<unsigned>(v);
      if (key == "work") k.cost.work = v;
      if (key == "loop") k.cost.loop = v;
      if (key == "hazard") k.cost.hazard = v;
    }
  } else {
    fail(ErrorKind::Config, "cannot sweep over '" + std::string(key) + "'");
  }
  validate(c);
}

Trace load_run_trace(const RunConfig& rc) {
  if (rc.trace_path) return parse_trace(read_file(*rc.trace_path));
  GeneratorSpec g = rc.generator.value_or(GeneratorSpec{});
  WorkloadProfile p = profile_by_name(g.profile);
  p.commit_width = std::min(p.commit_width, rc.sim.commit_width);
  return generate_synthetic(p, g.seed, g.length);
}

}  // namespace fg
