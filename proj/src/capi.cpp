#include "fireguard/fireguard.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <sstream>
#include <string>

#include "fireguard/config.hpp"
#include "fireguard/report.hpp"

struct fg_trace {
  fg::Trace trace;
};
struct fg_config {
  fg::RunConfig rc;
};
struct fg_metrics {
  fg::Metrics metrics;
  fg::RunInfo info;
  std::optional<fg::LatencyReport> latency;
};

namespace {

thread_local std::string last_error;

fg_status status_of(fg::ErrorKind k) {
  switch (k) {
    case fg::ErrorKind::Parse: return FG_ERR_PARSE;
    case fg::ErrorKind::Ordering: return FG_ERR_ORDER;
    case fg::ErrorKind::Config: return FG_ERR_CONFIG;
    case fg::ErrorKind::Injection: return FG_ERR_INJECT;
    case fg::ErrorKind::Fault: return FG_ERR_FAULT;
    case fg::ErrorKind::Io: return FG_ERR_IO;
  }
  return FG_ERR_FAULT;
}

template <class F>
fg_status guard(F&& f) {
  try {
    f();
    last_error.clear();
    return FG_OK;
  } catch (const fg::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return FG_ERR_FAULT;
  } catch (const std::exception& e) {
    last_error = e.what();
    return FG_ERR_FAULT;
  }
}

fg_status arg_error(const char* what) {
  last_error = what;
  return FG_ERR_ARG;
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p == nullptr) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size() + 1);
  return p;
}

std::vector<fg::AttackSpec> parse_attacks(const char* text) {
  std::vector<fg::AttackSpec> out;
  std::istringstream in(text);
  std::string line;
  size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    std::istringstream ls(line);
    std::string seq, mode, payload;
    if (!(ls >> seq) || seq[0] == '#') continue;
    if (!(ls >> mode >> payload)) {
      fg::fail(fg::ErrorKind::Parse, "attack line " + std::to_string(no) + ": expected '<seq> <MODE> <payload>'");
    }
    auto m = fg::attack_mode_from_string(mode);
    if (!m) fg::fail(fg::ErrorKind::Parse, "attack line " + std::to_string(no) + ": unknown mode '" + mode + "'");
    try {
      out.push_back({std::stoull(seq, nullptr, 0), *m, std::stoull(payload, nullptr, 0)});
    } catch (const std::logic_error&) {
      fg::fail(fg::ErrorKind::Parse, "attack line " + std::to_string(no) + ": bad number");
    }
  }
  return out;
}

}  // namespace

extern "C" {

const char* fg_last_error(void) { return last_error.c_str(); }

const char* fg_status_name(fg_status s) {
  switch (s) {
    case FG_OK: return "ok";
    case FG_ERR_PARSE: return "parse error";
    case FG_ERR_ORDER: return "ordering error";
    case FG_ERR_CONFIG: return "config error";
    case FG_ERR_INJECT: return "injection error";
    case FG_ERR_FAULT: return "fault";
    case FG_ERR_IO: return "i/o error";
    case FG_ERR_ARG: return "invalid argument";
  }
  return "unknown";
}

void fg_string_free(char* s) { std::free(s); }

fg_status fg_trace_parse(const char* text, size_t len, fg_trace** out) {
  if (text == nullptr || out == nullptr) return arg_error("null argument");
  return guard([&] { *out = new fg_trace{fg::parse_trace(std::string_view(text, len))}; });
}

fg_status fg_trace_load(const char* path, fg_trace** out) {
  if (path == nullptr || out == nullptr) return arg_error("null argument");
  return guard([&] { *out = new fg_trace{fg::parse_trace(fg::read_file(path))}; });
}

fg_status fg_trace_generate(const char* profile, uint64_t seed, size_t length, fg_trace** out) {
  if (profile == nullptr || out == nullptr) return arg_error("null argument");
  return guard([&] {
    *out = new fg_trace{fg::generate_synthetic(fg::profile_by_name(profile), seed, length)};
  });
}

fg_status fg_profile_names(char** out) {
  if (out == nullptr) return arg_error("null argument");
  return guard([&] {
    std::string s;
    for (const auto& n : fg::profile_names()) s += n + "\n";
    *out = dup(s);
  });
}

fg_status fg_trace_inject(const fg_trace* t, const char* attacks, fg_trace** out, char** truth) {
  if (t == nullptr || attacks == nullptr || out == nullptr || truth == nullptr) {
    return arg_error("null argument");
  }
  return guard([&] {
    fg::MultiInjection inj = fg::inject_attacks(t->trace, parse_attacks(attacks));
    std::string gt = fg::serialize_ground_truth(inj.truths);
    auto* nt = new fg_trace{std::move(inj.trace)};
    try {
      *truth = dup(gt);
    } catch (...) {
      delete nt;
      throw;
    }
    *out = nt;
  });
}

fg_status fg_trace_plan_attacks(const fg_trace* t, const char* mode, size_t count, uint64_t seed,
                                uint64_t flood, char** attacks) {
  if (t == nullptr || mode == nullptr || attacks == nullptr) return arg_error("null argument");
  return guard([&] {
    auto m = fg::attack_mode_from_string(mode);
    if (!m) fg::fail(fg::ErrorKind::Injection, std::string("unknown attack mode '") + mode + "'");
    std::string s;
    for (const auto& a : fg::plan_attacks(t->trace, *m, count, seed, flood)) {
      s += std::to_string(a.seq) + " " + std::string(fg::to_string(a.mode)) + " " +
           std::to_string(a.payload) + "\n";
    }
    *attacks = dup(s);
  });
}

fg_status fg_trace_serialize(const fg_trace* t, char** out) {
  if (t == nullptr || out == nullptr) return arg_error("null argument");
  return guard([&] { *out = dup(fg::serialize_trace(t->trace)); });
}

fg_status fg_trace_save(const fg_trace* t, const char* path) {
  if (t == nullptr || path == nullptr) return arg_error("null argument");
  return guard([&] { fg::write_file(path, fg::serialize_trace(t->trace)); });
}

size_t fg_trace_size(const fg_trace* t) { return t == nullptr ? 0 : t->trace.records.size(); }

void fg_trace_free(fg_trace* t) { delete t; }

fg_status fg_config_parse(const char* json, const char* base_dir, fg_config** out) {
  if (json == nullptr || out == nullptr) return arg_error("null argument");
  return guard([&] { *out = new fg_config{fg::parse_run_config(json, base_dir ? base_dir : "")}; });
}

fg_status fg_config_load(const char* path, fg_config** out) {
  if (path == nullptr || out == nullptr) return arg_error("null argument");
  return guard([&] {
    std::string text = fg::read_file(path);
    std::string base = std::filesystem::path(path).parent_path().string();
    *out = new fg_config{fg::parse_run_config(text, base)};
  });
}

fg_status fg_config_override(fg_config* c, const char* key, const char* value) {
  if (c == nullptr || key == nullptr || value == nullptr) return arg_error("null argument");
  return guard([&] {
    fg::RunConfig copy = c->rc;
    fg::apply_override(copy, key, value);
    c->rc = std::move(copy);
  });
}

fg_status fg_config_clone(const fg_config* c, fg_config** out) {
  if (c == nullptr || out == nullptr) return arg_error("null argument");
  return guard([&] { *out = new fg_config{c->rc}; });
}

fg_status fg_config_set_label(fg_config* c, const char* label) {
  if (c == nullptr || label == nullptr) return arg_error("null argument");
  return guard([&] { c->rc.label = label; });
}

fg_status fg_config_trace(const fg_config* c, fg_trace** out) {
  if (c == nullptr || out == nullptr) return arg_error("null argument");
  return guard([&] { *out = new fg_trace{fg::load_run_trace(c->rc)}; });
}

const char* fg_config_truth_path(const fg_config* c) {
  return c != nullptr && c->rc.truth_path ? c->rc.truth_path->c_str() : nullptr;
}

void fg_config_free(fg_config* c) { delete c; }

fg_status fg_run(const fg_trace* t, const fg_config* c, const char* truth, fg_metrics** out) {
  if (t == nullptr || c == nullptr || out == nullptr) return arg_error("null argument");
  return guard([&] {
    auto m = std::make_unique<fg_metrics>();
    m->metrics = fg::simulate(t->trace, c->rc.sim);
    m->info = fg::describe(c->rc);
    if (truth != nullptr) m->latency = fg::measure_latency(m->metrics, fg::parse_ground_truth(truth));
    *out = m.release();
  });
}

fg_status fg_metrics_json(const fg_metrics* m, char** out) {
  if (m == nullptr || out == nullptr) return arg_error("null argument");
  return guard([&] { *out = dup(fg::metrics_to_json(m->metrics, m->info, m->latency)); });
}

fg_status fg_metrics_csv_header(char** out) {
  if (out == nullptr) return arg_error("null argument");
  return guard([&] { *out = dup(fg::csv_header()); });
}

fg_status fg_metrics_csv_row(const fg_metrics* m, char** out) {
  if (m == nullptr || out == nullptr) return arg_error("null argument");
  return guard([&] { *out = dup(fg::csv_row(m->metrics, m->info)); });
}

fg_status fg_metrics_verdict_log(const fg_metrics* m, char** out) {
  if (m == nullptr || out == nullptr) return arg_error("null argument");
  return guard([&] { *out = dup(fg::verdict_log(m->metrics)); });
}

double fg_metrics_slowdown(const fg_metrics* m) { return m == nullptr ? 0.0 : m->metrics.slowdown(); }

size_t fg_metrics_verdicts(const fg_metrics* m) { return m == nullptr ? 0 : m->metrics.verdicts.size(); }

size_t fg_metrics_misses(const fg_metrics* m) {
  return m == nullptr || !m->latency ? 0 : m->latency->misses;
}

void fg_metrics_free(fg_metrics* m) { delete m; }

fg_status fg_report(const char* const* docs, size_t n, char** out) {
  if ((docs == nullptr && n > 0) || out == nullptr) return arg_error("null argument");
  return guard([&] {
    std::vector<std::string> v;
    for (size_t i = 0; i < n; ++i) {
      if (docs[i] == nullptr) fg::fail(fg::ErrorKind::Config, "null metrics document");
      v.emplace_back(docs[i]);
    }
    *out = dup(fg::report_tables(v));
  });
}

}  // extern "C"
