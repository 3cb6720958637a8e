#include "fireguard/engine.hpp"

#include <algorithm>

namespace fg {

std::string_view to_string(IsaxMode m) {
  return m == IsaxMode::MaStage ? "ma_stage" : "post_commit";
}

IsaxMode isax_from_string(std::string_view s) {
  if (s == "ma_stage" || s == "ma") return IsaxMode::MaStage;
  if (s == "post_commit" || s == "post") return IsaxMode::PostCommit;
  fail(ErrorKind::Config, "unknown ISAX mode '" + std::string(s) + "'");
}

uint64_t op_cost(IsaxMode mode, bool dependent, uint64_t hazard) {
  if (mode == IsaxMode::MaStage) return dependent ? 2 : 1;
  return 3 + (dependent ? std::min<uint64_t>(hazard, 10) : 0);
}

std::string_view to_string(ProgrammingModel m) {
  switch (m) {
    case ProgrammingModel::SingleIter: return "single";
    case ProgrammingModel::Duff: return "duff";
    case ProgrammingModel::Unrolled: return "unrolled";
    case ProgrammingModel::Hybrid: return "hybrid";
  }
  return "?";
}

ProgrammingModel model_from_string(std::string_view s) {
  if (s == "single" || s == "single_iter") return ProgrammingModel::SingleIter;
  if (s == "duff") return ProgrammingModel::Duff;
  if (s == "unrolled") return ProgrammingModel::Unrolled;
  if (s == "hybrid") return ProgrammingModel::Hybrid;
  fail(ErrorKind::Config, "unknown programming model '" + std::string(s) + "'");
}

namespace {

BatchPlan single(uint64_t cnt, uint64_t pop_dep, const CostParams& cp) {
  uint64_t c = cnt + pop_dep + cp.work + cp.loop;
  return {1, c, {c}};
}

BatchPlan duff(uint64_t cnt, uint64_t pop_dep, const CostParams& cp, size_t n) {
  BatchPlan p;
  p.packets = n;
  uint64_t t = cnt + cp.loop;
  for (size_t i = 0; i < n; ++i) {
    t += pop_dep + cp.work;
    p.offsets.push_back(t);
  }
  p.cycles = t;
  return p;
}

}  // namespace

BatchPlan plan_batch(const CostParams& cp, size_t n) {
  if (n == 0) return {};
  if (cp.accelerator) return {1, 1, {1}};
  const uint64_t cnt = op_cost(cp.isax, true, cp.hazard);
  const uint64_t pop_dep = op_cost(cp.isax, true, cp.hazard);
  const uint64_t pop_ind = op_cost(cp.isax, false, cp.hazard);
  const size_t u = std::max(cp.unroll, 1u);
  switch (cp.model) {
    case ProgrammingModel::SingleIter:
      return single(cnt, pop_dep, cp);
    case ProgrammingModel::Duff:
      return duff(cnt, pop_dep, cp, n);
    case ProgrammingModel::Unrolled: {
      if (n < u) return single(cnt, pop_dep, cp);
      BatchPlan p;
      p.packets = u;
      uint64_t t = cnt + cp.loop;
      for (size_t i = 0; i < u; ++i) {
        t += pop_ind + cp.work;
        p.offsets.push_back(t);
      }
      p.cycles = t;
      return p;
    }
    case ProgrammingModel::Hybrid: {
      if (n < u) return duff(cnt, pop_dep, cp, n);
      // Unrolled body over whole groups of u, Duff tail for the rest.
      BatchPlan p;
      p.packets = n;
      uint64_t t = cnt + cp.loop;
      const size_t whole = (n / u) * u;
      for (size_t i = 0; i < n; ++i) {
        t += (i < whole ? pop_ind : pop_dep) + cp.work;
        p.offsets.push_back(t);
      }
      p.cycles = t;
      return p;
    }
  }
  return {};
}

uint64_t drain_cycles(const CostParams& cp, size_t n) {
  uint64_t total = 0;
  while (n > 0) {
    BatchPlan p = plan_batch(cp, n);
    total += p.cycles;
    n -= std::min(n, p.packets);
  }
  return total;
}

// ---------------------------------------------------------------------------

Engine::Engine(unsigned index, size_t queue_capacity, size_t net_capacity, size_t out_capacity)
    : index_(index), in_q_(queue_capacity), net_q_(net_capacity), out_q_(out_capacity) {}

void Engine::add_kernel(unsigned kernel_id, std::unique_ptr<GuardianKernel> kernel,
                        CostParams cost) {
  if (hosts(kernel_id)) fail(ErrorKind::Config, "kernel mapped twice onto one engine");
  slots_.push_back({kernel_id, std::move(kernel), cost});
}

bool Engine::hosts(unsigned kernel_id) const {
  return std::any_of(slots_.begin(), slots_.end(),
                     [&](const Slot& s) { return s.id == kernel_id; });
}

Engine::Slot& Engine::slot(unsigned kernel_id) {
  for (auto& s : slots_) {
    if (s.id == kernel_id) return s;
  }
  fail(ErrorKind::Fault, "engine " + std::to_string(index_) + " has no kernel " +
                             std::to_string(kernel_id));
}

std::optional<uint64_t> Engine::q_top(unsigned bit_offset) {
  if (in_q_.empty()) {
    ++stats_.queue_empty;
    return std::nullopt;
  }
  return in_q_.front().packet.field(bit_offset);
}

std::optional<Packet> Engine::q_pop() {
  if (in_q_.empty()) {
    ++stats_.queue_empty;
    return std::nullopt;
  }
  QueueEntry e = in_q_.pop();
  recent_ = e.packet;
  ++stats_.consumed;
  if (on_consume) on_consume(e.packet.seq, e.kernel);
  return recent_;
}

uint64_t Engine::q_recent(unsigned bit_offset) const {
  if (!recent_) fail(ErrorKind::Fault, "q_recent before any q_pop");
  return recent_->field(bit_offset);
}

bool Engine::q_push(int dst, uint8_t tag, uint64_t value, unsigned kernel) {
  if (out_q_.full()) return false;
  FabricPacket p;
  p.src = static_cast<int>(index_);
  p.dst = dst;
  p.tag = tag;
  p.kernel = kernel;
  p.value = value;
  out_q_.push(p);
  ++stats_.pushes;
  return true;
}

void Engine::push(int dst_engine, uint8_t tag, uint64_t value) {
  FabricPacket p;
  p.src = static_cast<int>(index_);
  p.dst = dst_engine;
  p.tag = tag;
  p.kernel = current_kernel_;
  p.value = value;
  pending_.push_back(p);
  ++pushed_this_step_;
}

void Engine::report(ViolationClass cls, uint64_t seq) {
  Verdict v;
  v.seq = seq;
  v.cls = cls;
  v.pc = q_recent(0);
  v.detect_cycle = detect_;
  v.engine = index_;
  v.kernel = current_kernel_;
  verdicts_.push_back(v);
}

uint64_t Engine::flush_pushes() {
  uint64_t n = 0;
  while (!pending_.empty() && !out_q_.full()) {
    out_q_.push(pending_.front());
    pending_.pop_front();
    ++stats_.pushes;
    ++n;
  }
  return n;
}

uint64_t Engine::run_packet(Slot& s, const QueueEntry& e, uint64_t detect, bool& blocked) {
  recent_ = e.packet;
  detect_ = detect;
  current_kernel_ = s.id;
  blocked = s.kernel->on_packet(e.packet, *this) == Outcome::Blocked;
  return 0;
}

void Engine::step(uint64_t s) {
  if (s < busy_until_) return;
  flush_pushes();
  if (!pending_.empty()) {
    ++stats_.push_stalls;
    return;
  }
  pushed_this_step_ = 0;
  uint64_t cost = 0;

  auto push_cost = [&](const CostParams& cp) {
    return pushed_this_step_ * (cp.accelerator ? 1 : op_cost(cp.isax, false, cp.hazard));
  };

  if (!net_q_.empty()) {
    FabricPacket m = net_q_.pop();
    Slot& sl = slot(m.kernel);
    const CostParams& cp = sl.cost;
    current_kernel_ = sl.id;
    detect_ = s;
    sl.kernel->on_message(m, *this);
    cost = cp.accelerator ? 1
                          : op_cost(cp.isax, true, cp.hazard) * 2 + cp.work + cp.loop;
    cost += push_cost(cp);
    ++stats_.messages;
  } else if (!deferred_.empty()) {
    Slot& sl = slot(deferred_.front().kernel);
    if (sl.kernel->waiting()) {
      ++stats_.wait_cycles;
      return;
    }
    const CostParams& cp = sl.cost;
    const uint64_t per = cp.accelerator ? 1 : op_cost(cp.isax, true, cp.hazard) + cp.work;
    while (!deferred_.empty()) {
      Slot& cur = slot(deferred_.front().kernel);
      if (cur.kernel->waiting()) break;
      cost += per;
      bool blocked = false;
      run_packet(cur, deferred_.front(), s + cost, blocked);
      if (blocked) break;
      deferred_.pop_front();
    }
    cost += push_cost(cp);
  } else if (!in_q_.empty()) {
    Slot& sl = slot(in_q_.front().kernel);
    const CostParams& cp = sl.cost;
    size_t run = 0;
    for (const auto& e : in_q_) {
      if (e.kernel != sl.id) break;
      ++run;
    }
    BatchPlan plan = plan_batch(cp, run);
    bool blocked = false;
    for (size_t i = 0; i < plan.packets; ++i) {
      QueueEntry e = in_q_.pop();
      ++stats_.consumed;
      if (on_consume) on_consume(e.packet.seq, e.kernel);
      if (blocked) {
        recent_ = e.packet;
        deferred_.push_back(e);
        continue;
      }
      run_packet(sl, e, s + plan.offsets[i], blocked);
      if (blocked) deferred_.push_back(e);
    }
    cost = plan.cycles + push_cost(cp);
  } else {
    ++stats_.idle_polls;
    return;
  }
  cost = std::max<uint64_t>(cost, 1);
  stats_.busy_cycles += cost;
  busy_until_ = s + cost;
  flush_pushes();
}

bool Engine::idle(uint64_t s) const {
  return s >= busy_until_ && in_q_.empty() && net_q_.empty() && deferred_.empty() &&
         pending_.empty() && out_q_.empty();
}

}  // namespace fg
