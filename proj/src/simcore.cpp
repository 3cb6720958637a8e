#include "fireguard/simcore.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace fg {

unsigned ClockConfig::ratio() const {
  if (!(fast_hz > 0) || !(slow_hz > 0)) fail(ErrorKind::Config, "clock frequencies must be positive");
  double r = fast_hz / slow_hz;
  double ri = std::round(r);
  if (ri < 1 || std::abs(r - ri) > 1e-9 * ri) {
    fail(ErrorKind::Config, "fast_hz / slow_hz must be a positive integer");
  }
  return static_cast<unsigned>(ri);
}

std::vector<uint8_t> default_gids(KernelType type) {
  switch (type) {
    case KernelType::Pmc: return {gid::kLoad};
    case KernelType::ShadowStack: return {gid::kCall, gid::kRet};
    case KernelType::Asan:
    case KernelType::Uaf: return {gid::kLoad, gid::kStore, gid::kHeap};
  }
  return {};
}

Policy default_policy(KernelType type) {
  switch (type) {
    case KernelType::Asan:
    case KernelType::Uaf: return Policy::AddrHash;
    default: return Policy::Fixed;
  }
}

std::vector<uint8_t> default_broadcast_gids(KernelType type) {
  if (type == KernelType::Asan || type == KernelType::Uaf) return {gid::kHeap};
  return {};
}

std::string_view to_string(StallCause c) {
  switch (c) {
    case kFilterFull: return "filter_full";
    case kFifoFull: return "fifo_full";
    case kCdcFull: return "cdc_full";
    case kPrfConflict: return "prf_conflict";
    default: return "?";
  }
}

namespace {

EngineMask kernel_mask(const KernelConfig& k, unsigned engines) {
  if (k.engines.empty()) return engines >= 64 ? ~0ULL : ((1ULL << engines) - 1);
  EngineMask m = 0;
  for (unsigned e : k.engines) m |= 1ULL << e;
  return m;
}

const std::vector<uint8_t>& or_default(const std::vector<uint8_t>& v, std::vector<uint8_t>& tmp,
                                       std::vector<uint8_t> (*dflt)(KernelType), KernelType t) {
  if (!v.empty()) return v;
  tmp = dflt(t);
  return tmp;
}

}  // namespace

void validate(const SimConfig& c) {
  auto bad = [](const std::string& m) { fail(ErrorKind::Config, m); };
  c.clock.ratio();
  if (c.clock.cdc_depth == 0) bad("cdc_depth must be positive");
  if (c.commit_width == 0 || c.commit_width > 16) bad("commit_width must be in [1,16]");
  if (c.filter_width == 0 || c.filter_width > 16) bad("filter_width must be in [1,16]");
  if (c.fifo_depth == 0) bad("fifo_depth must be positive");
  if (c.engines == 0 || c.engines > kMaxEngines) bad("engines must be in [1,64]");
  if (c.queue_capacity == 0) bad("queue_capacity must be positive");
  if (c.port_depth == 0) bad("mesh port_depth must be positive");
  if ((c.mesh_width > 0) != (c.mesh_height > 0)) bad("mesh width and height must be given together");
  if (c.mesh_width < 0 || c.mesh_height < 0) bad("mesh dimensions must be positive");
  if (c.mesh_width > 0 && static_cast<unsigned>(c.mesh_width * c.mesh_height) < c.engines) {
    bad("mesh has fewer nodes than engines");
  }
  if (!(c.prf_conflict_p >= 0.0 && c.prf_conflict_p <= 1.0)) bad("prf_conflict_p must be in [0,1]");
  if (c.max_gids < 2 || c.max_gids > 256) bad("max_gids must be in [2,256]");
  if (c.filter_table && c.filter_table->max_gids() > c.max_gids) bad("filter table gid range too wide");
  if (c.kernels.size() > kMaxSchedulingEngines) bad("at most 32 kernels");
  for (size_t i = 0; i < c.kernels.size(); ++i) {
    const KernelConfig& k = c.kernels[i];
    const std::string who = "kernel " + std::to_string(i) + " (" + std::string(to_string(k.type)) + "): ";
    for (unsigned e : k.engines) {
      if (e >= c.engines) bad(who + "engine " + std::to_string(e) + " does not exist");
    }
    std::vector<uint8_t> tmp;
    for (uint8_t g : or_default(k.gids, tmp, default_gids, k.type)) {
      if (g == 0 || g >= c.max_gids) bad(who + "gid " + std::to_string(g) + " out of range");
    }
    const EngineMask m = kernel_mask(k, c.engines);
    if (k.policy == Policy::Fixed && !(k.fixed_target < kMaxEngines && (m & (1ULL << k.fixed_target)))) {
      bad(who + "fixed_target must be one of the kernel's engines");
    }
    if (k.type == KernelType::ShadowStack && k.policy != Policy::Fixed) {
      bad(who + "the shadow stack must use the fixed policy");
    }
    if (k.cost.unroll == 0) bad(who + "unroll must be positive");
    if (k.cost.hazard > 10) bad(who + "hazard must be at most 10");
    if (k.type == KernelType::Pmc && k.params.pmc.window == 0) bad(who + "PMC window must be positive");
    if (k.type == KernelType::Pmc) {
      for (const auto& b : k.params.pmc.bounds) {
        if (b && b->lo > b->hi) bad(who + "PMC bound lo exceeds hi");
      }
    }
  }
  // Multicast is all-or-nothing, so one packet's entries for a single engine
  // must fit in its input queue at once.
  std::map<std::pair<unsigned, uint8_t>, size_t> per_engine;
  for (const auto& k : c.kernels) {
    std::vector<uint8_t> tmp;
    const EngineMask m = kernel_mask(k, c.engines);
    for (uint8_t g : or_default(k.gids, tmp, default_gids, k.type)) {
      for (unsigned e = 0; e < c.engines; ++e) {
        if ((m & (1ULL << e)) && ++per_engine[{e, g}] > c.queue_capacity) {
          bad("gid " + std::to_string(g) + " can fan out to more kernels on engine " +
              std::to_string(e) + " than queue_capacity holds");
        }
      }
    }
  }
}

FilterTable build_default_filter_table(const SimConfig& c) {
  std::set<uint8_t> used;
  for (const auto& k : c.kernels) {
    std::vector<uint8_t> tmp;
    for (uint8_t g : or_default(k.gids, tmp, default_gids, k.type)) used.insert(g);
  }
  FilterTable t(c.max_gids);
  auto prog = [&](uint8_t g, uint8_t op, std::initializer_list<uint8_t> f3s, bool p, bool l, bool f) {
    if (!used.count(g) || g >= c.max_gids) return;
    for (uint8_t f3 : f3s) t.program(filter_index(op, f3), {g, p, l, f});
  };
  const auto all = {uint8_t{0}, uint8_t{1}, uint8_t{2}, uint8_t{3},
                    uint8_t{4}, uint8_t{5}, uint8_t{6}, uint8_t{7}};
  prog(gid::kLoad, opcode::kLoad, all, false, true, false);
  prog(gid::kStore, opcode::kStore, all, false, true, false);
  prog(gid::kCall, opcode::kJal, all, false, false, true);
  prog(gid::kRet, opcode::kJalr, {0}, false, false, true);
  prog(gid::kHeap, opcode::kCustom0, {0, 1}, true, true, false);
  prog(gid::kBranch, opcode::kBranch, {0, 1, 4, 5, 6, 7}, false, false, true);
  prog(gid::kAlu, opcode::kOpImm, all, true, false, false);
  prog(gid::kAlu, opcode::kOp, all, true, false, false);
  return t;
}

double Metrics::slowdown() const {
  if (baseline_cycles == 0) return 1.0;
  return static_cast<double>(baseline_cycles + stalled_cycles) / static_cast<double>(baseline_cycles);
}

double Metrics::cycles_per_packet() const {
  uint64_t busy = 0;
  for (const auto& e : engines) busy += e.busy_cycles;
  return consumed == 0 ? 0.0 : static_cast<double>(busy) / static_cast<double>(consumed);
}

LatencyReport measure_latency(const Metrics& m, const std::vector<GroundTruth>& truths) {
  LatencyReport r;
  std::vector<double> ns;
  for (const auto& t : truths) {
    LatencyEntry e;
    e.truth = t;
    const uint64_t span = std::max<uint64_t>(t.count, 1);
    const VerdictRecord* best = nullptr;
    for (const auto& v : m.verdicts) {
      if (v.verdict.cls != t.expected) continue;
      if (v.verdict.seq < t.seq || v.verdict.seq >= t.seq + span) continue;
      if (best == nullptr || v.verdict.detect_cycle < best->verdict.detect_cycle) best = &v;
    }
    if (best != nullptr) {
      e.detected = true;
      e.latency_cycles = best->latency_cycles;
      e.latency_ns = best->latency_ns;
      ns.push_back(e.latency_ns);
    } else {
      ++r.misses;
    }
    r.entries.push_back(e);
  }
  if (!ns.empty()) {
    std::sort(ns.begin(), ns.end());
    r.min_ns = ns.front();
    r.max_ns = ns.back();
    r.median_ns = ns.size() % 2 ? ns[ns.size() / 2]
                                : (ns[ns.size() / 2 - 1] + ns[ns.size() / 2]) / 2.0;
  }
  return r;
}

// ---------------------------------------------------------------------------

class Simulator::Endpoints final : public MeshEndpoints {
 public:
  explicit Endpoints(std::vector<std::unique_ptr<Engine>>& e) : engines_(e) {}
  const FabricPacket* peek_outgoing(int node) override {
    if (node >= static_cast<int>(engines_.size())) return nullptr;
    auto& q = engines_[node]->out_queue();
    return q.empty() ? nullptr : &q.front();
  }
  void pop_outgoing(int node) override { engines_[node]->out_queue().pop(); }
  bool can_accept(int node) const override {
    return node < static_cast<int>(engines_.size()) && !engines_[node]->net_queue().full();
  }
  void accept(int node, FabricPacket&& p) override { engines_[node]->net_queue().push(std::move(p)); }

 private:
  std::vector<std::unique_ptr<Engine>>& engines_;
};

Simulator::Simulator(Trace trace, SimConfig config)
    : trace_(std::move(trace)),
      config_(std::move(config)),
      fifo_(std::max(config_.filter_width, 1u), std::max<size_t>(config_.fifo_depth, 1)) {
  validate(config_);
  validate_trace(trace_);
  if (trace_.commit_width > config_.commit_width) {
    fail(ErrorKind::Config, "trace commit width " + std::to_string(trace_.commit_width) +
                                " exceeds configured commit_width");
  }
  ratio_ = config_.clock.ratio();
  drain_ = config_.clock.cdc_drain_per_slow ? config_.clock.cdc_drain_per_slow : ratio_;
  table_ = config_.filter_table ? *config_.filter_table : build_default_filter_table(config_);

  const unsigned n = config_.engines;
  for (unsigned i = 0; i < n; ++i) {
    engines_.push_back(std::make_unique<Engine>(i, config_.queue_capacity));
    engines_.back()->on_consume = [this, i](uint64_t seq, unsigned kernel) {
      if (on_consume) on_consume(seq, i, kernel);
    };
  }

  const unsigned nk = static_cast<unsigned>(config_.kernels.size());
  Distributor dist(config_.max_gids, std::max(nk, 1u));
  std::vector<SchedulingEngine> ses;
  for (unsigned k = 0; k < nk; ++k) {
    const KernelConfig& kc = config_.kernels[k];
    std::vector<uint8_t> tmp;
    for (uint8_t g : or_default(kc.gids, tmp, default_gids, kc.type)) dist.subscribe(g, k);
    SchedulingEngine se;
    se.kernel_id = k;
    se.policy = kc.policy;
    se.fixed_target = kc.fixed_target;
    se.ae_mask = kernel_mask(kc, n);
    se.block_full_threshold =
        config_.block_full_threshold ? config_.block_full_threshold : config_.queue_capacity;
    std::vector<uint8_t> btmp;
    se.broadcast_gids = or_default(kc.broadcast_gids, btmp, default_broadcast_gids, kc.type);
    ses.push_back(se);

    // The shadow stack spills from its fixed engine to the next one in its set.
    int spill = -1;
    if (kc.type == KernelType::ShadowStack && popcount64(se.ae_mask) > 1) {
      for (unsigned s = 1; s < kMaxEngines; ++s) {
        unsigned cand = (kc.fixed_target + s) % kMaxEngines;
        if (se.ae_mask & (1ULL << cand)) {
          spill = static_cast<int>(cand);
          break;
        }
      }
    }
    for (unsigned e = 0; e < n; ++e) {
      if (!(se.ae_mask & (1ULL << e))) continue;
      int target = (e == kc.fixed_target) ? spill : -1;
      engines_[e]->add_kernel(k, make_kernel(kc.type, kc.params, target), kc.cost);
    }
  }
  allocator_ = std::make_unique<Allocator>(std::move(dist), std::move(ses));

  int w = config_.mesh_width, h = config_.mesh_height;
  if (w == 0) std::tie(w, h) = default_mesh_dims(n);
  mesh_ = std::make_unique<Mesh>(w, h, config_.port_depth);

  commit_cycle_.assign(trace_.records.size(), 0);
  cdc_pending_.assign(n, 0);
  m_.records = trace_.records.size();
  m_.baseline_cycles = trace_.records.empty() ? 0 : trace_.records.back().cycle + 1;
  m_.engines.resize(n);
  for (auto& em : m_.engines) em.occupancy.assign(config_.queue_capacity + 1, 0);
}

Simulator::~Simulator() = default;

std::vector<size_t> Simulator::occupancy() const {
  std::vector<size_t> occ(engines_.size());
  for (size_t i = 0; i < engines_.size(); ++i) occ[i] = engines_[i]->in_queue().size() + cdc_pending_[i];
  return occ;
}

void Simulator::stall(StallCause c) {
  ++m_.stalls[c];
  ++m_.stalled_cycles;
}

void Simulator::commit_stage() {
  const auto& recs = trace_.records;
  if (next_ >= recs.size()) return;
  if (prf_penalty_ > 0) {
    --prf_penalty_;
    stall(kPrfConflict);
    return;
  }
  if (!in_group_) {
    const uint64_t b = cycle_ - m_.stalled_cycles;
    if (recs[next_].cycle > b) {  // baseline bubble
      last_progress_ = cycle_;
      return;
    }
    group_end_ = next_;
    while (group_end_ < recs.size() && recs[group_end_].cycle == recs[next_].cycle) ++group_end_;
    in_group_ = true;
  }
  if (!fifo_.can_accept()) {
    stall(kFifoFull);
    return;
  }
  if (cdc_full()) {
    stall(kCdcFull);
    return;
  }
  const size_t chunk = std::min<size_t>(config_.filter_width, group_end_ - next_);
  std::span<const TraceRecord> rows(recs.data() + next_, chunk);
  filter_step(fifo_, table_, rows);
  bool conflict = false;
  for (size_t i = 0; i < chunk; ++i) {
    const TraceRecord& r = rows[i];
    commit_cycle_[next_ + i] = cycle_;
    const FilterEntry& e = table_.lookup(r.opcode, r.funct3);
    if (e.gid == 0) continue;
    ++m_.sensitive;
    if (e.sel_prf && config_.prf_conflict_p > 0) {
      const double u = static_cast<double>(mix64(config_.seed ^ mix64(r.seq + 0x5052464bULL)) >> 11) *
                       0x1.0p-53;
      if (u < config_.prf_conflict_p) conflict = true;
    }
  }
  if (conflict) pending_conflict_ = true;
  next_ += chunk;
  last_progress_ = cycle_;
  if (next_ < group_end_) {
    stall(kFilterFull);
  } else {
    in_group_ = false;
    if (pending_conflict_) prf_penalty_ = 1;
    pending_conflict_ = false;
  }
}

void Simulator::allocator_stage() {
  if (arbiter_busy_ > 0) {
    --arbiter_busy_;
  } else if (!held_) {
    auto r = fifo_.arbiter_step();
    arbiter_busy_ = r.skipped * config_.skip_cost_cycles;
    if (r.skipped > 0 || r.packet) last_progress_ = cycle_;
    if (r.packet) {
      if (on_arbiter_output) on_arbiter_output(*r.packet);
      Allocation a = allocator_->allocate(*r.packet, occupancy());
      last_progress_ = cycle_;
      if (!a.deliveries.empty()) held_ = Held{*r.packet, std::move(a)};
    }
  }
  if (held_ && !cdc_full()) {
    CdcEntry e{held_->packet, held_->alloc.deliveries, slow_ + 1};
    for (const auto& d : e.deliveries) ++cdc_pending_[d.engine];
    allocator_->commit(held_->alloc);
    cdc_.push_back(std::move(e));
    held_.reset();
    last_progress_ = cycle_;
  }
}

void Simulator::slow_step() {
  const uint64_t k = slow_;
  std::vector<BoundedQueue<QueueEntry>*> queues;
  queues.reserve(engines_.size());
  for (auto& e : engines_) queues.push_back(&e->in_queue());

  unsigned drained = 0;
  while (drained < drain_ && !cdc_.empty() && cdc_.front().eligible <= k) {
    CdcEntry& e = cdc_.front();
    MulticastResult r = multicast_deliver(e.deliveries, e.packet, queues);
    if (!r.delivered) {
      ++m_.mq_full_slow_cycles;
      break;
    }
    ++m_.multicasts;
    m_.delivered_entries += e.deliveries.size();
    for (const auto& d : e.deliveries) --cdc_pending_[d.engine];
    cdc_.pop_front();
    ++drained;
    last_progress_ = cycle_;
  }

  Endpoints ep(engines_);
  const uint64_t moves = mesh_->flit_moves();
  mesh_->step(ep);
  if (mesh_->flit_moves() != moves) last_progress_ = cycle_;

  for (size_t i = 0; i < engines_.size(); ++i) {
    Engine& e = *engines_[i];
    const uint64_t before = e.stats().consumed + e.stats().messages + e.stats().pushes;
    e.step(k);
    if (e.stats().consumed + e.stats().messages + e.stats().pushes != before) last_progress_ = cycle_;
    EngineMetrics& em = m_.engines[i];
    const size_t occ = e.in_queue().size();
    ++em.occupancy[std::min(occ, em.occupancy.size() - 1)];
    if (e.in_queue().full()) ++em.full_cycles;
  }
  ++slow_;
}

void Simulator::tick() {
  commit_stage();
  allocator_stage();
  if (!fifo_.can_accept()) ++m_.fifo_full_cycles;
  if (cdc_full()) ++m_.cdc_full_cycles;
  ++cycle_;
  if (cycle_ % ratio_ == 0) slow_step();
}

bool Simulator::done() const {
  if (next_ < trace_.records.size() || prf_penalty_ > 0 || arbiter_busy_ > 0) return false;
  if (!fifo_.empty() || held_ || !cdc_.empty() || mesh_->packets_in_flight() > 0) return false;
  for (const auto& e : engines_) {
    if (!e->idle(slow_)) return false;
  }
  return true;
}

uint64_t Simulator::in_flight_packets() const {
  return fifo_.buffered_valid() + (held_ ? 1 : 0) + cdc_.size();
}

uint64_t Simulator::in_flight_entries() const {
  uint64_t n = 0;
  for (const auto& e : engines_) n += e->in_queue().size();
  return n;
}

bool Simulator::conserved() const {
  const uint64_t dropped = allocator_->distributor().no_subscriber();
  if (m_.sensitive != in_flight_packets() + m_.multicasts + dropped) return false;
  uint64_t consumed = 0;
  for (const auto& e : engines_) consumed += e->stats().consumed;
  return m_.delivered_entries == consumed + in_flight_entries();
}

Metrics Simulator::run() {
  while (!done()) {
    tick();
    if (cycle_ - last_progress_ > config_.deadlock_cycles) {
      fail(ErrorKind::Fault, "simulation made no progress for " +
                                 std::to_string(config_.deadlock_cycles) + " cycles at fast cycle " +
                                 std::to_string(cycle_));
    }
  }
  return metrics();
}

Metrics Simulator::metrics() const {
  Metrics m = m_;
  m.fast_cycles = cycle_;
  m.slow_cycles = slow_;
  m.no_subscriber = allocator_->distributor().no_subscriber();
  m.mesh_injected = mesh_->injected();
  m.mesh_delivered = mesh_->delivered();
  m.mesh_flit_moves = mesh_->flit_moves();
  m.consumed = 0;
  const auto& recs = trace_.records;
  for (size_t i = 0; i < engines_.size(); ++i) {
    const EngineStats& s = engines_[i]->stats();
    EngineMetrics& em = m.engines[i];
    em.consumed = s.consumed;
    em.messages = s.messages;
    em.busy_cycles = s.busy_cycles;
    em.idle_polls = s.idle_polls;
    em.queue_empty = s.queue_empty;
    em.push_stalls = s.push_stalls;
    em.wait_cycles = s.wait_cycles;
    m.consumed += s.consumed;
    for (const Verdict& v : engines_[i]->verdicts()) {
      VerdictRecord r;
      r.verdict = v;
      auto it = std::lower_bound(recs.begin(), recs.end(), v.seq,
                                 [](const TraceRecord& a, uint64_t s) { return a.seq < s; });
      if (it != recs.end() && it->seq == v.seq) {
        r.commit_cycle = commit_cycle_[static_cast<size_t>(it - recs.begin())];
      }
      r.latency_cycles = static_cast<double>(v.detect_cycle) -
                         static_cast<double>(r.commit_cycle) / static_cast<double>(ratio_);
      r.latency_ns = r.latency_cycles / config_.clock.slow_hz * 1e9;
      m.verdicts.push_back(r);
    }
  }
  std::sort(m.verdicts.begin(), m.verdicts.end(), [](const VerdictRecord& a, const VerdictRecord& b) {
    const Verdict& x = a.verdict;
    const Verdict& y = b.verdict;
    return std::tie(x.seq, x.cls, x.engine, x.kernel, x.detect_cycle) <
           std::tie(y.seq, y.cls, y.engine, y.kernel, y.detect_cycle);
  });
  return m;
}

Metrics simulate(const Trace& trace, const SimConfig& config) {
  Simulator sim(trace, config);
  return sim.run();
}

}  // namespace fg
