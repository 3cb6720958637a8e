// Acceptance suite. One PASS/FAIL line per criterion; exit status is the
// number of failures. Runtime limits are wall-clock and pinned below.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fireguard/report.hpp"
#include "fireguard/simcore.hpp"
#include "oracles.hpp"

using namespace fg;

namespace {

struct Result {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double limit_s, const std::function<Result()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Result r;
  try {
    r = body();
  } catch (const std::exception& e) {
    r = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char timing[96];
  if (limit_s > 0) {
    std::snprintf(timing, sizeof timing, "%.2f s, limit %.0f s", s, limit_s);
    if (s > limit_s) r.pass = false;
  } else {
    std::snprintf(timing, sizeof timing, "%.2f s", s);
  }
  if (!r.pass) ++failures;
  std::printf("%s %2d %-22s %s (%s)\n", r.pass ? "PASS" : "FAIL", id, name, r.detail.c_str(), timing);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double unit(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

WorkloadProfile random_profile(std::mt19937_64& g) {
  const auto names = profile_names();
  WorkloadProfile p = profile_by_name(names[g() % names.size()]);
  if (g() % 2) {
    p.name = "random";
    p.load = 0.4 * unit(g);
    p.store = 0.2 * unit(g);
    p.call_ret = 0.2 * unit(g);
    p.jump = 0.1 * unit(g);
    p.alloc_rate = 0.02 * unit(g);
    p.idle = 0.5 * unit(g);
    p.max_group = static_cast<unsigned>(g() % 5);
  }
  return p;
}

WorkloadProfile heap_profile(std::mt19937_64& g) {
  WorkloadProfile p = profile_by_name(g() % 2 ? "asan-heavy" : "default");
  p.alloc_rate = 0.004 + 0.012 * unit(g);
  p.idle = 0.3 * unit(g);
  return p;
}

KernelConfig kernel(KernelType t, Policy p, std::vector<unsigned> engines = {}) {
  KernelConfig k;
  k.type = t;
  k.policy = p;
  k.engines = std::move(engines);
  k.fixed_target = k.engines.empty() ? 0 : k.engines.front();
  return k;
}

std::vector<unsigned> random_subset(std::mt19937_64& g, unsigned n) {
  std::vector<unsigned> s;
  for (unsigned e = 0; e < n; ++e) {
    if (g() % 2) s.push_back(e);
  }
  if (s.empty()) s.push_back(static_cast<unsigned>(g() % n));
  return s;
}

void random_cost(std::mt19937_64& g, CostParams& c) {
  c.model = static_cast<ProgrammingModel>(g() % 4);
  c.isax = g() % 2 ? IsaxMode::MaStage : IsaxMode::PostCommit;
  c.work = g() % 9;
  c.loop = g() % 5;
  c.unroll = 1u << (1 + g() % 3);
  c.hazard = g() % 11;
}

SimConfig draw_config(std::mt19937_64& g) {
  SimConfig c;
  c.engines = 1 + static_cast<unsigned>(g() % 8);
  c.filter_width = 1 + static_cast<unsigned>(g() % 4);
  const size_t depths[] = {1, 2, 4, 16};
  c.fifo_depth = depths[g() % 4];
  const size_t caps[] = {2, 4, 8, 32};
  c.queue_capacity = caps[g() % 4];
  c.clock.cdc_depth = 1 + g() % 8;
  c.skip_cost_cycles = static_cast<unsigned>(g() % 2);
  c.prf_conflict_p = g() % 3 == 0 ? 0.05 * unit(g) : 0.0;
  c.seed = g();
  const unsigned nk = 1 + static_cast<unsigned>(g() % 3);
  for (unsigned k = 0; k < nk; ++k) {
    const auto type = static_cast<KernelType>(g() % 4);
    KernelConfig kc;
    kc.type = type;
    kc.engines = random_subset(g, c.engines);
    if (type == KernelType::ShadowStack) {
      kc.policy = Policy::Fixed;
      const size_t th[] = {0, 2, 4, 64};
      kc.params.spill_threshold = th[g() % 4];
      kc.params.recall_batch = 1 + g() % 4;
    } else {
      kc.policy = static_cast<Policy>(g() % 4);
    }
    kc.fixed_target = kc.engines[g() % kc.engines.size()];
    if (type == KernelType::Pmc) {
      for (uint8_t gd = 1; gd <= 7; ++gd) {
        if (g() % 3 == 0) kc.gids.push_back(gd);
      }
    }
    random_cost(g, kc.cost);
    kc.cost.accelerator = g() % 8 == 0;
    c.kernels.push_back(kc);
  }
  return c;
}

/// Redraws until the config validates (a queue too small for one packet's
/// fan-out is rejected up front).
SimConfig random_config(std::mt19937_64& g) {
  for (;;) {
    SimConfig c = draw_config(g);
    try {
      validate(c);
      return c;
    } catch (const Error&) {
    }
  }
}

/// Expected queue entries per sensitive packet, straight from the config.
std::vector<unsigned> expected_fanout(const SimConfig& c) {
  std::vector<unsigned> per_gid(256, 0);
  for (const auto& k : c.kernels) {
    auto gids = k.gids.empty() ? default_gids(k.type) : k.gids;
    auto bc = k.broadcast_gids.empty() ? default_broadcast_gids(k.type) : k.broadcast_gids;
    const unsigned width = k.engines.empty() ? c.engines : static_cast<unsigned>(k.engines.size());
    for (uint8_t g : gids) {
      const bool b = std::find(bc.begin(), bc.end(), g) != bc.end();
      per_gid[g] += b ? width : 1;
    }
  }
  return per_gid;
}

oracle::Findings verdict_set(const Metrics& m) {
  oracle::Findings f;
  for (const auto& v : m.verdicts) f.insert({v.verdict.seq, v.verdict.cls});
  return f;
}

// ---------------------------------------------------------------------------
// 1 + 2: ordering and conservation over the same 1000 property traces

struct PropertyStats {
  size_t traces = 0, records = 0, ticks = 0;
  size_t order_bad = 0, conserve_bad = 0, fanout_bad = 0;
  std::string first_problem;
};

PropertyStats property_runs() {
  PropertyStats st;
  std::mt19937_64 g(20240601);
  for (int i = 0; i < 1000; ++i) {
    const size_t len = 50 + g() % 9951;
    Trace t = generate_synthetic(random_profile(g), g(), len);
    SimConfig c = random_config(g);
    const FilterTable table = build_default_filter_table(c);
    std::vector<uint64_t> expect_seq;
    std::vector<uint64_t> expect_fan(t.records.size(), 0);
    const auto fan = expected_fanout(c);
    for (const auto& r : t.records) {
      const uint8_t gd = table.lookup(r.opcode, r.funct3).gid;
      if (gd == 0) continue;
      expect_seq.push_back(r.seq);
      expect_fan[r.seq] = fan[gd];
    }

    Simulator sim(t, c);
    std::vector<uint64_t> seen;
    std::vector<uint64_t> consumed(t.records.size(), 0);
    sim.on_arbiter_output = [&](const Packet& p) { seen.push_back(p.seq); };
    sim.on_consume = [&](uint64_t seq, unsigned, unsigned) { ++consumed[seq]; };
    bool conserved = true;
    const uint64_t cap = 64 * (t.records.back().cycle + 1) + 4'000'000;
    while (!sim.done()) {
      sim.tick();
      if (!sim.conserved()) conserved = false;
      if (sim.fast_cycle() > cap) {
        conserved = false;
        break;
      }
    }
    st.ticks += sim.fast_cycle();
    ++st.traces;
    st.records += t.records.size();
    auto note = [&](const char* what) {
      if (st.first_problem.empty()) st.first_problem = fmt("trace %d: %s", i, what);
    };
    if (seen != expect_seq) {
      ++st.order_bad;
      note("arbiter order");
    }
    if (!conserved) {
      ++st.conserve_bad;
      note("conservation");
    }
    if (consumed != expect_fan) {
      ++st.fanout_bad;
      note("fan-out");
    }
  }
  return st;
}

// ---------------------------------------------------------------------------
// 3: oracle equivalence

struct EquivStats {
  size_t runs = 0, attacks = 0, misses = 0, mismatches = 0, clean_runs = 0, clean_verdicts = 0;
  size_t rr_runs = 0, rr_mismatches = 0, verdicts = 0;
  std::map<std::string, size_t> by_kernel;
  std::string first_problem;
};

/// Most loads in any `window`-cycle interval of the trace.
uint64_t max_sliding_loads(const Trace& t, uint64_t window) {
  std::vector<uint64_t> cyc;
  for (const auto& r : t.records) {
    if (r.kind == Kind::Load) cyc.push_back(r.cycle);
  }
  uint64_t best = 0;
  size_t lo = 0;
  for (size_t hi = 0; hi < cyc.size(); ++hi) {
    while (cyc[hi] - cyc[lo] >= window) ++lo;
    best = std::max<uint64_t>(best, hi - lo + 1);
  }
  return best;
}

EquivStats equivalence_runs() {
  EquivStats st;
  std::mt19937_64 g(77);
  const unsigned engine_choices[] = {1, 2, 4, 8};
  for (int i = 0; i < 500; ++i) {
    const size_t n_attacks = static_cast<size_t>(i % 11);
    const size_t len = 3000 + g() % 5001;
    Trace heap_trace = generate_synthetic(heap_profile(g), g(), len);
    WorkloadProfile cp = profile_by_name("call-heavy");
    cp.max_call_depth = 8 + static_cast<unsigned>(g() % 56);
    Trace call_trace = generate_synthetic(cp, g(), len);
    const unsigned engines = engine_choices[i % 4];

    auto check = [&](const char* name, const Trace& attacked, const std::vector<GroundTruth>& truth,
                     const SimConfig& c, const oracle::Findings& expect) {
      Metrics m = simulate(attacked, c);
      LatencyReport lr = measure_latency(m, truth);
      oracle::Findings got = verdict_set(m);
      ++st.runs;
      ++st.by_kernel[name];
      st.attacks += truth.size();
      st.misses += lr.misses;
      st.verdicts += got.size();
      if (got != expect) {
        ++st.mismatches;
        if (st.first_problem.empty()) {
          st.first_problem = fmt("trace %d %s: %zu verdicts vs %zu oracle", i, name, got.size(),
                                 expect.size());
        }
      }
      if (truth.empty()) {
        ++st.clean_runs;
        st.clean_verdicts += got.size();
      }
    };

    // Shadow stack, FIXED, spill to a neighbour when there is one.
    {
      auto specs = plan_attacks(call_trace, AttackMode::HijackRet, n_attacks, g());
      MultiInjection inj = inject_attacks(call_trace, specs);
      SimConfig c;
      c.engines = engines;
      std::vector<unsigned> set = engines > 1 ? std::vector<unsigned>{0, 1} : std::vector<unsigned>{0};
      c.kernels = {kernel(KernelType::ShadowStack, Policy::Fixed, set)};
      const size_t th[] = {0, 4, 8, 64};
      c.kernels[0].params.spill_threshold = th[g() % 4];
      c.kernels[0].params.recall_batch = 1 + g() % 8;
      random_cost(g, c.kernels[0].cost);
      check("shadowstack", inj.trace, inj.truths, c, oracle::shadow_stack(inj.trace));
    }
    // ASan and UaF under every policy.
    for (auto [type, mode] : {std::pair{KernelType::Asan, AttackMode::OobAccess},
                              std::pair{KernelType::Uaf, AttackMode::UafAccess}}) {
      auto specs = plan_attacks(heap_trace, mode, n_attacks, g());
      MultiInjection inj = inject_attacks(heap_trace, specs);
      SimConfig c;
      c.engines = engines;
      c.kernels = {kernel(type, static_cast<Policy>(g() % 4))};
      c.kernels[0].fixed_target = static_cast<unsigned>(g() % engines);
      random_cost(g, c.kernels[0].cost);
      if (type == KernelType::Asan) {
        check("asan", inj.trace, inj.truths, c, oracle::asan(inj.trace));
      } else {
        check("uaf", inj.trace, inj.truths, c, oracle::uaf(inj.trace));
      }
    }
    // PMC: FIXED on one engine. hi sits above any natural window count, the
    // flood is twice hi so one window always crosses, and flood sites are
    // spaced so no two floods share a window.
    {
      const uint64_t window = 256;
      const uint64_t hi = max_sliding_loads(heap_trace, window) + 2;
      const uint64_t flood = 2 * (hi + 1);
      auto cand = plan_attacks(heap_trace, AttackMode::CounterFlood, 4 * n_attacks + 8, g(), flood);
      std::vector<AttackSpec> specs;
      for (const auto& a : cand) {
        if (specs.size() == n_attacks) break;
        const uint64_t cyc = heap_trace.records[a.seq].cycle;
        if (!specs.empty() && cyc < heap_trace.records[specs.back().seq].cycle + 3 * window) continue;
        specs.push_back(a);
      }
      MultiInjection inj = inject_attacks(heap_trace, specs);
      SimConfig c;
      c.engines = engines;
      const unsigned target = static_cast<unsigned>(g() % engines);
      c.kernels = {kernel(KernelType::Pmc, Policy::Fixed, {target})};
      PmcState& ps = c.kernels[0].params.pmc;
      ps.window = window;
      ps.bounds[static_cast<unsigned>(Kind::Load)] = CounterBound{0, hi};
      random_cost(g, c.kernels[0].cost);
      oracle::PmcBounds b;
      b.window = window;
      b.checked[static_cast<unsigned>(Kind::Load)] = true;
      b.lohi[static_cast<unsigned>(Kind::Load)] = {0, hi};
      check("pmc", inj.trace, inj.truths, c, oracle::pmc(inj.trace, {Kind::Load}, b, 1));

      // Round-robin PMC against the per-engine oracle, with lower bounds
      // armed too.
      const unsigned k = 2 + static_cast<unsigned>(g() % 3);
      SimConfig rr;
      rr.engines = k;
      rr.kernels = {kernel(KernelType::Pmc, Policy::RoundRobin)};
      PmcState& rs = rr.kernels[0].params.pmc;
      rs.window = 64;
      rs.bounds[static_cast<unsigned>(Kind::Load)] = CounterBound{2, hi / 2};
      random_cost(g, rr.kernels[0].cost);
      oracle::PmcBounds rb;
      rb.window = 64;
      rb.checked[static_cast<unsigned>(Kind::Load)] = true;
      rb.lohi[static_cast<unsigned>(Kind::Load)] = {2, hi / 2};
      ++st.rr_runs;
      if (verdict_set(simulate(inj.trace, rr)) != oracle::pmc(inj.trace, {Kind::Load}, rb, k)) {
        ++st.rr_mismatches;
        if (st.first_problem.empty()) st.first_problem = fmt("trace %d: round-robin pmc", i);
      }
    }
  }
  return st;
}

// ---------------------------------------------------------------------------

SimConfig asan_config(unsigned engines) {
  SimConfig c;
  c.engines = engines;
  c.kernels = {kernel(KernelType::Asan, Policy::AddrHash)};
  return c;
}

struct LatencyPoint {
  unsigned backlog;
  double cycles;
  double ns;
  size_t misses;
};

/// Quiet trace with a burst of `backlog` loads, then a trigger load flooded
/// by one copy. Every record shares one PMC window, so with
/// hi = backlog + 1 the flood copy is the first crossing.
std::pair<Trace, GroundTruth> backlog_trace(unsigned backlog) {
  Trace t;
  uint64_t seq = 0, cycle = 0;
  auto add = [&](Kind k, uint8_t op) {
    TraceRecord r;
    r.seq = seq++;
    r.cycle = cycle;
    r.pc = 0x1000 + 4 * r.seq;
    r.opcode = op;
    r.kind = k;
    if (carries_mem_addr(k)) r.mem_addr = 0x8000 + 8 * r.seq;
    t.records.push_back(r);
  };
  for (int i = 0; i < 200; ++i, ++cycle) add(Kind::Alu, opcode::kOp);
  for (unsigned i = 0; i < backlog; ++i) {
    add(Kind::Load, opcode::kLoad);
    if (i % 4 == 3) ++cycle;
  }
  ++cycle;
  add(Kind::Load, opcode::kLoad);
  const uint64_t trigger = seq - 1;
  ++cycle;
  for (int i = 0; i < 400; ++i, ++cycle) add(Kind::Alu, opcode::kOp);
  Injection inj = inject_attack(t, {trigger, AttackMode::CounterFlood, 1});
  return {inj.trace, inj.truth};
}

SimConfig latency_config(unsigned backlog) {
  SimConfig c;
  c.engines = 1;
  c.kernels = {kernel(KernelType::Pmc, Policy::Fixed, {0})};
  c.kernels[0].cost.isax = IsaxMode::MaStage;
  PmcState& ps = c.kernels[0].params.pmc;
  ps.window = 1'000'000;
  ps.bounds[static_cast<unsigned>(Kind::Load)] = CounterBound{0, backlog + 1};
  return c;
}

LatencyPoint latency_at(unsigned backlog, std::string* doc = nullptr) {
  auto [t, truth] = backlog_trace(backlog);
  Metrics m = simulate(t, latency_config(backlog));
  LatencyReport r = measure_latency(m, {truth});
  if (doc) *doc = metrics_to_json(m, RunInfo{}, r);
  return {backlog, r.entries[0].latency_cycles, r.entries[0].latency_ns, r.misses};
}

// ---------------------------------------------------------------------------
// 9: mesh

struct Sink : MeshEndpoints {
  explicit Sink(int n) : out(n), accept_mask(n, true) {}
  std::vector<std::deque<FabricPacket>> out;
  std::vector<bool> accept_mask;
  std::vector<FabricPacket> got;
  std::vector<int> got_at;
  const FabricPacket* peek_outgoing(int n) override { return out[n].empty() ? nullptr : &out[n].front(); }
  void pop_outgoing(int n) override { out[n].pop_front(); }
  bool can_accept(int n) const override { return accept_mask[n]; }
  void accept(int n, FabricPacket&& p) override {
    got.push_back(p);
    got_at.push_back(n);
  }
};

Result noc_criterion() {
  std::mt19937_64 g(9);
  size_t hop_bad = 0, lat_bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const int w = 1 + static_cast<int>(g() % 8), h = 1 + static_cast<int>(g() % 8);
    Mesh m(w, h);
    Sink s(w * h);
    FabricPacket p;
    const int src = static_cast<int>(g() % (w * h)), dst = static_cast<int>(g() % (w * h));
    p.dst = dst;
    s.out[src].push_back(p);
    int steps = 0;
    while (s.got.empty() && steps < 1000) {
      m.step(s);
      ++steps;
    }
    if (s.got.size() != 1 || s.got_at[0] != dst) {
      ++hop_bad;
      continue;
    }
    const unsigned man = manhattan(m.coord(src), m.coord(dst));
    if (s.got[0].hops != man) ++hop_bad;
    if (steps != static_cast<int>(src == dst ? 1 : man + 2)) ++lat_bad;
  }

  // Uniform random traffic at 0.3 packets/node/cycle, 1-2 flits, sinks
  // refusing one cycle in ten.
  Mesh m(4, 4);
  Sink s(16);
  uint64_t sent = 0, next_value = 0;
  uint64_t stuck = 0, worst_stuck = 0;
  bool deadlock = false;
  auto cycle = [&](bool inject) {
    if (inject) {
      for (int n = 0; n < 16; ++n) {
        if (unit(g) >= 0.3) continue;
        FabricPacket p;
        int d = static_cast<int>(g() % 15);
        p.dst = d >= n ? d + 1 : d;
        p.flits = 1 + static_cast<unsigned>(g() % 2);
        p.value = next_value++;
        s.out[n].push_back(p);
        ++sent;
      }
    }
    for (int n = 0; n < 16; ++n) s.accept_mask[n] = unit(g) >= 0.1;
    const uint64_t before = m.flit_moves();
    m.step(s);
    if (m.flits_in_flight() > 0 && m.flit_moves() == before) {
      worst_stuck = std::max(worst_stuck, ++stuck);
      if (stuck > 1000) deadlock = true;
    } else {
      stuck = 0;
    }
  };
  for (int c = 0; c < 100000 && !deadlock; ++c) cycle(true);
  auto pending = [&] {
    size_t q = 0;
    for (auto& o : s.out) q += o.size();
    return q + m.packets_in_flight();
  };
  for (int c = 0; c < 1000000 && pending() > 0 && !deadlock; ++c) cycle(false);

  std::vector<bool> seen(next_value, false);
  size_t dup = 0, misrouted = 0;
  for (size_t i = 0; i < s.got.size(); ++i) {
    if (seen[s.got[i].value]) ++dup;
    seen[s.got[i].value] = true;
    if (s.got[i].dst != s.got_at[i]) ++misrouted;
    if (s.got[i].hops != manhattan(m.coord(s.got[i].src), m.coord(s.got[i].dst))) ++hop_bad;
  }
  const size_t lost = sent - (s.got.size() - dup);
  Result r;
  r.pass = hop_bad == 0 && lat_bad == 0 && !deadlock && lost == 0 && dup == 0 && misrouted == 0;
  r.detail = fmt("10000 pairs: %zu hop mismatches, %zu latency mismatches; traffic: %llu sent, "
                 "%zu lost, %zu duplicated, deadlock=%s",
                 hop_bad, lat_bad, static_cast<unsigned long long>(sent), lost, dup,
                 deadlock ? "yes" : "no");
  return r;
}

}  // namespace

int main() {
  PropertyStats prop;
  criterion(1, "ordering", 30, [&] {
    prop = property_runs();
    Result r;
    r.pass = prop.order_bad == 0 && prop.traces == 1000;
    r.detail = fmt("%zu traces, %zu records, %zu order mismatches%s%s", prop.traces, prop.records,
                   prop.order_bad, prop.first_problem.empty() ? "" : "; first: ",
                   prop.first_problem.c_str());
    return r;
  });
  criterion(2, "conservation", 0, [&] {
    Result r;
    r.pass = prop.traces == 1000 && prop.conserve_bad == 0 && prop.fanout_bad == 0;
    r.detail = fmt("checked at each of %zu cycles; %zu imbalanced runs, %zu fan-out mismatches",
                   prop.ticks, prop.conserve_bad, prop.fanout_bad);
    return r;
  });

  criterion(3, "oracle-equivalence", 120, [] {
    EquivStats st = equivalence_runs();
    Result r;
    r.pass = st.mismatches == 0 && st.misses == 0 && st.clean_verdicts == 0 && st.rr_mismatches == 0 &&
             st.runs == 2000;
    r.detail = fmt("%zu runs (%zu per kernel), %zu attacks, %zu misses, %zu set mismatches, "
                   "%zu clean runs with %zu verdicts, round-robin pmc %zu/%zu match%s%s",
                   st.runs, st.by_kernel["pmc"], st.attacks, st.misses, st.mismatches,
                   st.clean_runs, st.clean_verdicts, st.rr_runs - st.rr_mismatches, st.rr_runs,
                   st.first_problem.empty() ? "" : "; first: ", st.first_problem.c_str());
    return r;
  });

  const Trace heavy = generate_synthetic(profile_by_name("asan-heavy"), 7, 100000);
  std::vector<std::string> scaling_docs;
  criterion(4, "scaling", 0, [&] {
    std::vector<double> s;
    std::string pts;
    for (unsigned n : {1u, 2u, 4u, 8u, 12u}) {
      Metrics m = simulate(heavy, asan_config(n));
      scaling_docs.push_back(metrics_to_json(m, RunInfo{}, std::nullopt));
      s.push_back(m.slowdown());
      pts += fmt("%s%u:%.4f", pts.empty() ? "" : " ", n, m.slowdown());
    }
    bool mono = true, strict = false;
    for (size_t i = 1; i < s.size(); ++i) {
      mono = mono && s[i] <= s[i - 1];
      strict = strict || s[i] < s[i - 1];
    }
    return Result{mono && strict, "slowdown by engines " + pts};
  });

  criterion(5, "filter-width", 0, [&] {
    std::vector<Metrics> ms;
    for (unsigned w : {1u, 2u, 4u}) {
      SimConfig c = asan_config(12);
      c.filter_width = w;
      ms.push_back(simulate(heavy, c));
    }
    Result r;
    r.pass = ms[0].slowdown() >= ms[1].slowdown() && ms[1].slowdown() >= ms[2].slowdown() &&
             ms[2].stalls[kFilterFull] == 0;
    r.detail = fmt("slowdown w1 %.4f >= w2 %.4f >= w4 %.4f; filter_full w1 %llu w2 %llu w4 %llu",
                   ms[0].slowdown(), ms[1].slowdown(), ms[2].slowdown(),
                   static_cast<unsigned long long>(ms[0].stalls[kFilterFull]),
                   static_cast<unsigned long long>(ms[1].stalls[kFilterFull]),
                   static_cast<unsigned long long>(ms[2].stalls[kFilterFull]));
    return r;
  });

  criterion(6, "programming-models", 10, [] {
    size_t points = 0, order_bad = 0, formula_bad = 0;
    for (auto isax : {IsaxMode::MaStage, IsaxMode::PostCommit}) {
      for (unsigned u : {2u, 4u, 8u}) {
        for (uint64_t w = 0; w <= 8; ++w) {
          for (uint64_t l = 0; l <= 4; ++l) {
            CostParams c;
            c.isax = isax;
            c.work = w;
            c.loop = l;
            c.unroll = u;
            const oracle::Costs k{op_cost(isax, true), op_cost(isax, false), w, l, u};
            for (size_t n = 0; n <= 32; ++n) {
              uint64_t cyc[4];
              for (int m = 0; m < 4; ++m) {
                c.model = static_cast<ProgrammingModel>(m);
                cyc[m] = drain_cycles(c, n);
              }
              const uint64_t single = cyc[0], duff = cyc[1], unr = cyc[2], hyb = cyc[3];
              ++points;
              if (single != oracle::single_iter_total(k, n) || duff != oracle::duff_total(k, n) ||
                  unr != oracle::unrolled_total(k, n) || hyb != oracle::hybrid_total(k, n)) {
                ++formula_bad;
              }
              if (!(hyb <= std::min(duff, unr) && std::min(duff, unr) <= single)) ++order_bad;
            }
          }
        }
      }
    }
    return Result{order_bad == 0 && formula_bad == 0,
                  fmt("%zu points, %zu ordering violations, %zu closed-form mismatches", points,
                      order_bad, formula_bad)};
  });

  criterion(7, "isax-modes", 0, [&] {
    bool ranges = true;
    for (uint64_t h = 0; h <= 16; ++h) {
      for (bool dep : {false, true}) {
        const uint64_t ma = op_cost(IsaxMode::MaStage, dep, h);
        const uint64_t pc = op_cost(IsaxMode::PostCommit, dep, h);
        ranges = ranges && ma == (dep ? 2u : 1u) && pc >= 3 && pc <= 13 &&
                 pc == (dep ? 3 + std::min<uint64_t>(h, 10) : 3);
      }
    }
    // End to end: every model, several kernels and traces.
    size_t runs = 0, bad = 0;
    std::string worst;
    std::mt19937_64 g(5);
    for (int i = 0; i < 24; ++i) {
      Trace t = generate_synthetic(i % 2 ? heap_profile(g) : profile_by_name("call-heavy"), g(),
                                   i < 20 ? 4000 : 1);
      SimConfig c = random_config(g);
      for (auto& k : c.kernels) k.cost.accelerator = false;
      const auto model = static_cast<ProgrammingModel>(i % 4);
      uint64_t busy[2] = {0, 0};
      uint64_t ops = 0;
      for (int mode = 0; mode < 2; ++mode) {
        for (auto& k : c.kernels) {
          k.cost.model = model;
          k.cost.isax = mode == 0 ? IsaxMode::MaStage : IsaxMode::PostCommit;
        }
        Metrics m = simulate(t, c);
        for (const auto& e : m.engines) busy[mode] += e.busy_cycles;
        ops = m.consumed;
      }
      if (ops == 0) continue;
      ++runs;
      if (!(busy[0] < busy[1])) {
        ++bad;
        if (worst.empty()) worst = fmt("; run %d: %llu vs %llu", i, (unsigned long long)busy[0],
                                       (unsigned long long)busy[1]);
      }
    }
    return Result{ranges && bad == 0 && runs > 0,
                  fmt("per-op ranges %s; %zu runs with queue ops, %zu where MA_STAGE >= "
                      "POST_COMMIT%s",
                      ranges ? "ok" : "WRONG", runs, bad, worst.c_str())};
  });

  std::vector<std::string> latency_docs;
  criterion(8, "detection-latency", 0, [&] {
    std::vector<LatencyPoint> pts;
    std::string s;
    for (unsigned b : {0u, 8u, 16u, 24u, 31u}) {
      latency_docs.emplace_back();
      pts.push_back(latency_at(b, &latency_docs.back()));
      s += fmt("%s%u:%.0f", s.empty() ? "" : " ", b, pts.back().cycles);
    }
    bool ok = pts[0].misses == 0 && pts[0].cycles <= 80 && pts[0].ns <= 50.0;
    for (size_t i = 1; i < pts.size(); ++i) ok = ok && pts[i].misses == 0 && pts[i].cycles >= pts[i - 1].cycles;
    return Result{ok, fmt("empty queue %.0f slow cycles (%.2f ns); latency by backlog %s",
                          pts[0].cycles, pts[0].ns, s.c_str())};
  });

  criterion(9, "noc", 60, noc_criterion);

  criterion(10, "determinism", 0, [&] {
    size_t compared = 0, differ = 0;
    auto same = [&](const std::string& a, const std::string& b) {
      ++compared;
      if (a != b) ++differ;
    };
    const unsigned ns[] = {1, 2, 4, 8, 12};
    const Trace again = generate_synthetic(profile_by_name("asan-heavy"), 7, 100000);
    same(serialize_trace(heavy), serialize_trace(again));
    for (size_t i = 0; i < scaling_docs.size(); ++i) {
      same(scaling_docs[i], metrics_to_json(simulate(again, asan_config(ns[i])), RunInfo{}, std::nullopt));
    }
    const unsigned bs[] = {0, 8, 16, 24, 31};
    for (size_t i = 0; i < latency_docs.size(); ++i) {
      std::string d;
      latency_at(bs[i], &d);
      same(latency_docs[i], d);
    }
    std::mt19937_64 g1(31), g2(31);
    for (int i = 0; i < 20; ++i) {
      Trace a = generate_synthetic(random_profile(g1), g1(), 3000);
      Trace b = generate_synthetic(random_profile(g2), g2(), 3000);
      SimConfig ca = random_config(g1), cb = random_config(g2);
      same(metrics_to_json(simulate(a, ca), RunInfo{}, std::nullopt),
           metrics_to_json(simulate(b, cb), RunInfo{}, std::nullopt));
    }
    return Result{differ == 0 && compared > 0,
                  fmt("%zu artifact pairs compared, %zu differ", compared, differ)};
  });

  return failures;
}
