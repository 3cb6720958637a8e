// fgsim: command-line front end over the fireguard C API.

#include <fireguard/fireguard.h>

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

enum Level { kError = 0, kWarn, kInfo, kDebug };

Level log_level() {
  const char* v = std::getenv("FG_LOG");
  if (v == nullptr) return kWarn;
  std::string s(v);
  if (s == "error") return kError;
  if (s == "info") return kInfo;
  if (s == "debug") return kDebug;
  return kWarn;
}

std::mutex log_mu;

void logf(Level lvl, const std::string& msg) {
  static const Level current = log_level();
  if (lvl > current) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::lock_guard<std::mutex> lock(log_mu);
  std::fprintf(stderr, "fgsim: %s: %s\n", names[lvl], msg.c_str());
}

int exit_code(fg_status s) {
  switch (s) {
    case FG_OK: return 0;
    case FG_ERR_IO: return 3;
    case FG_ERR_FAULT: return 1;
    default: return 2;
  }
}

struct Failure {
  fg_status status;
  std::string message;
};

void check(fg_status s, const std::string& what) {
  if (s != FG_OK) throw Failure{s, what + ": " + fg_last_error()};
}

// Owns a string returned by the library.
struct Str {
  char* p = nullptr;
  ~Str() { fg_string_free(p); }
  std::string get() const { return p ? p : ""; }
};

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
};
using Trace = Handle<fg_trace, fg_trace_free>;
using Config = Handle<fg_config, fg_config_free>;
using Metrics = Handle<fg_metrics, fg_metrics_free>;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{FG_ERR_IO, "cannot open '" + path + "'"};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(data.data(), static_cast<std::streamsize>(data.size()))) {
    throw Failure{FG_ERR_IO, "cannot write '" + path + "'"};
  }
  logf(kInfo, "wrote " + path);
}

// ---------------------------------------------------------------------------

struct GenOpts {
  std::string profile = "default";
  uint64_t seed = 1;
  size_t length = 10000;
  std::string out;
  bool list = false;
};

int cmd_gen(const GenOpts& o) {
  if (o.list) {
    Str names;
    check(fg_profile_names(&names.p), "profiles");
    std::fputs(names.get().c_str(), stdout);
    return 0;
  }
  if (o.out.empty()) throw Failure{FG_ERR_ARG, "gen: -o/--out is required"};
  Trace t;
  check(fg_trace_generate(o.profile.c_str(), o.seed, o.length, &t.p), "gen");
  check(fg_trace_save(t.p, o.out.c_str()), "gen");
  logf(kInfo, std::to_string(fg_trace_size(t.p)) + " records");
  return 0;
}

struct InjectOpts {
  std::string trace;
  std::string out;
  std::string truth;
  std::vector<std::string> attacks;
  std::string plan;
  size_t count = 1;
  uint64_t seed = 1;
  uint64_t flood = 64;
};

int cmd_inject(const InjectOpts& o) {
  Trace t;
  check(fg_trace_load(o.trace.c_str(), &t.p), "inject");
  std::string specs;
  for (const auto& a : o.attacks) {
    std::string s = a;
    std::replace(s.begin(), s.end(), ':', ' ');
    specs += s + "\n";
  }
  if (!o.plan.empty()) {
    Str planned;
    check(fg_trace_plan_attacks(t.p, o.plan.c_str(), o.count, o.seed, o.flood, &planned.p), "inject");
    specs += planned.get();
  }
  if (specs.empty()) throw Failure{FG_ERR_ARG, "inject: give --attack or --plan"};
  Trace injected;
  Str truth;
  check(fg_trace_inject(t.p, specs.c_str(), &injected.p, &truth.p), "inject");
  check(fg_trace_save(injected.p, o.out.c_str()), "inject");
  spit(o.truth.empty() ? o.out + ".truth" : o.truth, truth.get());
  return 0;
}

struct RunOpts {
  std::string config;
  std::string trace;
  std::string truth;
  std::string out = "fgsim";
  std::string sweep;
  unsigned jobs = 0;
};

struct Point {
  std::string key;
  std::string value;
  std::string json, csv, log;
  fg_status status = FG_OK;
  std::string error;
  size_t misses = 0;
};

void run_point(const fg_config* base, const fg_trace* trace, const char* truth, Point& p) {
  Config c;
  fg_status s = fg_config_clone(base, &c.p);
  if (s == FG_OK && !p.key.empty()) {
    s = fg_config_override(c.p, p.key.c_str(), p.value.c_str());
    if (s == FG_OK) s = fg_config_set_label(c.p, (p.key + "=" + p.value).c_str());
  }
  Metrics m;
  if (s == FG_OK) s = fg_run(trace, c.p, truth, &m.p);
  Str j, r, l;
  if (s == FG_OK) s = fg_metrics_json(m.p, &j.p);
  if (s == FG_OK) s = fg_metrics_csv_row(m.p, &r.p);
  if (s == FG_OK) s = fg_metrics_verdict_log(m.p, &l.p);
  if (s != FG_OK) {
    p.status = s;
    p.error = fg_last_error();
    return;
  }
  p.json = j.get();
  p.csv = r.get();
  p.log = l.get();
  p.misses = fg_metrics_misses(m.p);
}

int cmd_run(const RunOpts& o) {
  Config cfg;
  check(fg_config_load(o.config.c_str(), &cfg.p), "config");
  Trace t;
  if (!o.trace.empty()) {
    check(fg_trace_load(o.trace.c_str(), &t.p), "trace");
  } else {
    check(fg_config_trace(cfg.p, &t.p), "trace");
  }
  std::string truth_path = o.truth;
  if (truth_path.empty() && fg_config_truth_path(cfg.p) != nullptr) truth_path = fg_config_truth_path(cfg.p);
  std::string truth;
  if (!truth_path.empty()) truth = slurp(truth_path);
  const char* truth_c = truth_path.empty() ? nullptr : truth.c_str();

  std::vector<Point> points;
  if (o.sweep.empty()) {
    points.push_back({});
  } else {
    auto eq = o.sweep.find('=');
    if (eq == std::string::npos || eq == 0) throw Failure{FG_ERR_ARG, "--sweep expects key=v1,v2,..."};
    std::string key = o.sweep.substr(0, eq);
    std::stringstream vs(o.sweep.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ',')) {
      if (!v.empty()) points.push_back({key, v, {}, {}, {}, FG_OK, {}, 0});
    }
    if (points.empty()) throw Failure{FG_ERR_ARG, "--sweep has no values"};
  }

  // Validate every point before simulating any of them.
  for (const auto& p : points) {
    if (p.key.empty()) continue;
    Config c;
    check(fg_config_clone(cfg.p, &c.p), "sweep");
    check(fg_config_override(c.p, p.key.c_str(), p.value.c_str()), "sweep " + p.key + "=" + p.value);
  }

  unsigned jobs = o.jobs ? o.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(points.size()));
  std::vector<std::thread> pool;
  std::mutex mu;
  size_t next = 0;
  for (unsigned w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        size_t i;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= points.size()) return;
          i = next++;
        }
        logf(kDebug, "running point " + std::to_string(i));
        run_point(cfg.p, t.p, truth_c, points[i]);
      }
    });
  }
  for (auto& th : pool) th.join();

  for (const auto& p : points) {
    if (p.status != FG_OK) throw Failure{p.status, "run: " + p.error};
  }
  Str header;
  check(fg_metrics_csv_header(&header.p), "run");
  if (o.sweep.empty()) {
    const Point& p = points.front();
    spit(o.out + ".metrics.json", p.json);
    spit(o.out + ".csv", header.get() + p.csv);
    spit(o.out + ".verdicts.log", p.log);
    logf(kInfo, "verdicts: " + std::to_string(std::count(p.log.begin(), p.log.end(), '\n')));
  } else {
    std::string csv = header.get();
    for (const auto& p : points) {
      const std::string stem = o.out + "." + p.key + "-" + p.value;
      spit(stem + ".metrics.json", p.json);
      spit(stem + ".verdicts.log", p.log);
      csv += p.csv;
    }
    spit(o.out + ".sweep.csv", csv);
  }
  for (const auto& p : points) {
    if (p.misses > 0) logf(kWarn, std::to_string(p.misses) + " injected attack(s) not detected");
  }
  return 0;
}

struct ReportOpts {
  std::vector<std::string> files;
  std::string out;
};

int cmd_report(const ReportOpts& o) {
  std::vector<std::string> docs;
  for (const auto& f : o.files) docs.push_back(slurp(f));
  std::vector<const char*> ptrs;
  for (const auto& d : docs) ptrs.push_back(d.c_str());
  Str tables;
  check(fg_report(ptrs.data(), ptrs.size(), &tables.p), "report");
  if (o.out.empty()) {
    std::fputs(tables.get().c_str(), stdout);
  } else {
    spit(o.out, tables.get());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FireGuard fabric simulator"};
  app.require_subcommand(1);

  GenOpts gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic trace");
  g->add_option("--profile", gen.profile, "Workload profile");
  g->add_option("--seed", gen.seed, "Generator seed");
  g->add_option("--len", gen.length, "Number of records");
  g->add_option("-o,--out", gen.out, "Output trace file");
  g->add_flag("--list-profiles", gen.list, "List profile names and exit");

  InjectOpts inj;
  auto* i = app.add_subcommand("inject", "Inject attacks into a trace");
  i->add_option("--trace", inj.trace, "Input trace")->required();
  i->add_option("-o,--out", inj.out, "Output trace")->required();
  i->add_option("--truth", inj.truth, "Ground-truth output (default <out>.truth)");
  i->add_option("--attack", inj.attacks, "SEQ:MODE:PAYLOAD (repeatable)");
  i->add_option("--plan", inj.plan, "Pick attack sites of this mode automatically");
  i->add_option("--count", inj.count, "Number of planned attacks");
  i->add_option("--seed", inj.seed, "Planning seed");
  i->add_option("--flood", inj.flood, "Records per COUNTER_FLOOD");

  RunOpts run;
  auto* r = app.add_subcommand("run", "Simulate a trace");
  r->add_option("-c,--config", run.config, "JSON run config")->required();
  r->add_option("--trace", run.trace, "Trace file (overrides the config)");
  r->add_option("--truth", run.truth, "Ground-truth file for latency");
  r->add_option("-o,--out", run.out, "Output prefix");
  r->add_option("--sweep", run.sweep, "key=v1,v2,... one run per value");
  r->add_option("-j,--jobs", run.jobs, "Parallel runs for sweeps (0 = all cores)");

  ReportOpts rep;
  auto* p = app.add_subcommand("report", "Plot-ready tables from metrics files");
  p->add_option("files", rep.files, "Metrics JSON files")->required();
  p->add_option("-o,--out", rep.out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*g) return cmd_gen(gen);
    if (*i) return cmd_inject(inj);
    if (*r) return cmd_run(run);
    if (*p) return cmd_report(rep);
  } catch (const Failure& f) {
    logf(kError, f.message);
    return exit_code(f.status);
  }
  return 2;
}
