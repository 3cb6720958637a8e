#include "fireguard/kernels.hpp"

#include <algorithm>

namespace fg {

std::string_view to_string(KernelType t) {
  switch (t) {
    case KernelType::Pmc: return "pmc";
    case KernelType::ShadowStack: return "shadowstack";
    case KernelType::Asan: return "asan";
    case KernelType::Uaf: return "uaf";
  }
  return "?";
}

KernelType kernel_type_from_string(std::string_view s) {
  if (s == "pmc") return KernelType::Pmc;
  if (s == "shadowstack" || s == "ss") return KernelType::ShadowStack;
  if (s == "asan") return KernelType::Asan;
  if (s == "uaf") return KernelType::Uaf;
  fail(ErrorKind::Config, "unknown kernel type '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------

std::vector<Finding> pmc_process(PmcState& state, const Packet& pkt) {
  std::vector<Finding> out;
  const uint64_t w = pkt.stamp() / std::max<uint64_t>(state.window, 1);
  if (!state.current_window) {
    state.current_window = w;
  } else if (w > *state.current_window) {
    bool low = false;
    for (unsigned k = 0; k < kNumKinds; ++k) {
      if (state.bounds[k] && state.counters[k] < state.bounds[k]->lo) low = true;
    }
    if (low) out.push_back({pkt.seq, ViolationClass::CounterBound});
    state.counters.fill(0);
    state.reported.fill(false);
    state.current_window = w;
  }
  const auto k = static_cast<unsigned>(pkt.kind());
  if (k >= kNumKinds) return out;
  ++state.counters[k];
  if (state.bounds[k] && state.counters[k] > state.bounds[k]->hi && !state.reported[k]) {
    state.reported[k] = true;
    if (out.empty()) out.push_back({pkt.seq, ViolationClass::CounterBound});
  }
  return out;
}

// ---------------------------------------------------------------------------

StackStep shadowstack_process(ShadowStackState& s, const Packet& pkt, KernelIo& io) {
  StackStep step;
  switch (pkt.kind()) {
    case Kind::Call:
      s.stack.push_back(pkt.pc() + 4);
      if (s.spill_threshold > 0 && s.spill_target >= 0 && s.stack.size() > s.spill_threshold) {
        io.push(s.spill_target, ss_tag::kSpill, s.stack.front());
        s.stack.pop_front();
        ++s.spilled;
      }
      break;
    case Kind::Ret:
      if (s.stack.empty() && s.spilled > 0) {
        if (!s.awaiting_refill) {
          s.refill_expected = static_cast<size_t>(std::min<uint64_t>(s.recall_batch, s.spilled));
          s.refill.clear();
          s.awaiting_refill = true;
          io.push(s.spill_target, ss_tag::kRecall, s.refill_expected);
        }
        step.blocked = true;
        return step;
      }
      if (s.stack.empty()) {
        step.finding = Finding{pkt.seq, ViolationClass::RetMismatch};
      } else {
        uint64_t expected = s.stack.back();
        s.stack.pop_back();
        if (expected != pkt.address()) step.finding = Finding{pkt.seq, ViolationClass::RetMismatch};
      }
      break;
    default:
      break;
  }
  return step;
}

void shadowstack_message(ShadowStackState& s, const FabricPacket& msg, KernelIo& io) {
  switch (msg.tag) {
    case ss_tag::kSpill:
      s.store.push_back(msg.value);
      break;
    case ss_tag::kRecall: {
      uint64_t n = std::min<uint64_t>(msg.value, s.store.size());
      for (uint64_t i = 0; i < n; ++i) {
        io.push(msg.src, ss_tag::kRefill, s.store.back());
        s.store.pop_back();
      }
      break;
    }
    case ss_tag::kRefill:
      s.refill.push_back(msg.value);
      if (s.awaiting_refill && s.refill.size() == s.refill_expected) {
        // Refill arrives newest first; the local stack is empty here.
        for (uint64_t v : s.refill) s.stack.push_front(v);
        s.spilled -= s.refill_expected;
        s.refill.clear();
        s.awaiting_refill = false;
      }
      break;
    default:
      break;
  }
}

// ---------------------------------------------------------------------------

void ShadowMemory::allocate(uint64_t base, uint64_t size) {
  const uint64_t end = base + size;
  auto it = regions_.upper_bound(base);
  if (it != regions_.begin()) {
    auto prev = std::prev(it);
    if (prev->second.base + prev->second.size > base) it = prev;
  }
  while (it != regions_.end() && it->first < end) it = regions_.erase(it);
  regions_[base] = Region{base, size, RegionState::Valid};
}

ShadowMemory::Region* ShadowMemory::find_base(uint64_t base) {
  auto it = regions_.find(base);
  return it == regions_.end() ? nullptr : &it->second;
}

const ShadowMemory::Region* ShadowMemory::find(uint64_t addr) const {
  auto it = regions_.upper_bound(addr);
  if (it == regions_.begin()) return nullptr;
  --it;
  return addr < it->second.base + it->second.size ? &it->second : nullptr;
}

bool ShadowMemory::in_redzone(uint64_t addr, uint64_t redzone) const {
  if (redzone == 0) return false;
  auto next = regions_.upper_bound(addr);
  if (next != regions_.end() && next->first - addr <= redzone) return true;
  if (next != regions_.begin()) {
    const Region& r = std::prev(next)->second;
    uint64_t end = r.base + r.size;
    if (addr >= end && addr - end < redzone) return true;
  }
  return false;
}

void ShadowMemory::erase(uint64_t base) { regions_.erase(base); }

std::optional<Finding> asan_process(AsanState& s, const Packet& pkt) {
  switch (pkt.kind()) {
    case Kind::Alloc:
      s.shadow.allocate(pkt.address(), pkt.operand());
      return std::nullopt;
    case Kind::Free: {
      auto* r = s.shadow.find_base(pkt.address());
      if (r == nullptr || r->state != RegionState::Valid) {
        return Finding{pkt.seq, ViolationClass::Oob};
      }
      r->state = RegionState::Freed;
      return std::nullopt;
    }
    case Kind::Load:
    case Kind::Store: {
      const uint64_t addr = pkt.address();
      if (const auto* r = s.shadow.find(addr)) {
        if (r->state == RegionState::Valid) return std::nullopt;
        return Finding{pkt.seq, ViolationClass::Oob};
      }
      if (s.strict || s.shadow.in_redzone(addr, s.redzone)) {
        return Finding{pkt.seq, ViolationClass::Oob};
      }
      return std::nullopt;
    }
    default:
      return std::nullopt;
  }
}

std::optional<Finding> uaf_process(UafState& s, const Packet& pkt) {
  switch (pkt.kind()) {
    case Kind::Alloc:
      s.shadow.allocate(pkt.address(), pkt.operand());
      return std::nullopt;
    case Kind::Free: {
      auto* r = s.shadow.find_base(pkt.address());
      if (r == nullptr) return std::nullopt;
      if (r->state == RegionState::Freed) return Finding{pkt.seq, ViolationClass::Uaf};
      r->state = RegionState::Freed;
      s.quarantine.emplace_back(r->base, r->size);
      s.quarantined_bytes += r->size;
      while (s.quarantined_bytes > s.budget && !s.quarantine.empty()) {
        auto [base, size] = s.quarantine.front();
        s.quarantine.pop_front();
        s.quarantined_bytes -= size;
        auto* q = s.shadow.find_base(base);
        if (q != nullptr && q->state == RegionState::Freed) s.shadow.erase(base);
        ++s.evictions;
      }
      return std::nullopt;
    }
    case Kind::Load:
    case Kind::Store: {
      const auto* r = s.shadow.find(pkt.address());
      if (r != nullptr && r->state == RegionState::Freed) {
        return Finding{pkt.seq, ViolationClass::Uaf};
      }
      return std::nullopt;
    }
    default:
      return std::nullopt;
  }
}

// ---------------------------------------------------------------------------

namespace {

class PmcKernel final : public GuardianKernel {
 public:
  explicit PmcKernel(const PmcState& s) : state_(s) {}
  KernelType type() const override { return KernelType::Pmc; }
  Outcome on_packet(const Packet& pkt, KernelIo& io) override {
    for (const auto& f : pmc_process(state_, pkt)) io.report(f.cls, f.seq);
    return Outcome::Done;
  }

 private:
  PmcState state_;
};

class ShadowStackKernel final : public GuardianKernel {
 public:
  ShadowStackKernel(size_t threshold, size_t batch, int target) {
    state_.spill_threshold = threshold;
    state_.recall_batch = std::max<size_t>(batch, 1);
    state_.spill_target = target;
  }
  KernelType type() const override { return KernelType::ShadowStack; }
  Outcome on_packet(const Packet& pkt, KernelIo& io) override {
    StackStep st = shadowstack_process(state_, pkt, io);
    if (st.blocked) return Outcome::Blocked;
    if (st.finding) io.report(st.finding->cls, st.finding->seq);
    return Outcome::Done;
  }
  void on_message(const FabricPacket& msg, KernelIo& io) override {
    shadowstack_message(state_, msg, io);
  }
  bool waiting() const override { return state_.awaiting_refill; }

 private:
  ShadowStackState state_;
};

class AsanKernel final : public GuardianKernel {
 public:
  AsanKernel(bool strict, uint64_t redzone) {
    state_.strict = strict;
    state_.redzone = redzone;
  }
  KernelType type() const override { return KernelType::Asan; }
  Outcome on_packet(const Packet& pkt, KernelIo& io) override {
    if (auto f = asan_process(state_, pkt)) io.report(f->cls, f->seq);
    return Outcome::Done;
  }

 private:
  AsanState state_;
};

class UafKernel final : public GuardianKernel {
 public:
  explicit UafKernel(uint64_t budget) { state_.budget = budget; }
  KernelType type() const override { return KernelType::Uaf; }
  Outcome on_packet(const Packet& pkt, KernelIo& io) override {
    if (auto f = uaf_process(state_, pkt)) io.report(f->cls, f->seq);
    return Outcome::Done;
  }

 private:
  UafState state_;
};

}  // namespace

std::unique_ptr<GuardianKernel> make_kernel(KernelType type, const KernelParams& p,
                                            int spill_target) {
  switch (type) {
    case KernelType::Pmc: return std::make_unique<PmcKernel>(p.pmc);
    case KernelType::ShadowStack:
      return std::make_unique<ShadowStackKernel>(p.spill_threshold, p.recall_batch, spill_target);
    case KernelType::Asan: return std::make_unique<AsanKernel>(p.asan_strict, p.redzone);
    case KernelType::Uaf: return std::make_unique<UafKernel>(p.quarantine_budget);
  }
  fail(ErrorKind::Config, "unknown kernel type");
}

}  // namespace fg
