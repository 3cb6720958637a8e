#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "fireguard/filter.hpp"
#include "fireguard/noc.hpp"
#include "fireguard/trace.hpp"

namespace fg {

enum class KernelType : uint8_t { Pmc, ShadowStack, Asan, Uaf };

std::string_view to_string(KernelType t);
KernelType kernel_type_from_string(std::string_view s);

struct Verdict {
  uint64_t seq = 0;
  ViolationClass cls = ViolationClass::RetMismatch;
  uint64_t pc = 0;
  uint64_t detect_cycle = 0;  // slow-domain cycle
  unsigned engine = 0;
  unsigned kernel = 0;
};

/// What a kernel needs from the engine it runs on.
class KernelIo {
 public:
  virtual ~KernelIo() = default;
  virtual uint64_t recent(unsigned bit_offset) = 0;
  virtual void push(int dst_engine, uint8_t tag, uint64_t value) = 0;
  virtual void report(ViolationClass cls, uint64_t seq) = 0;
};

enum class Outcome : uint8_t { Done, Blocked };

class GuardianKernel {
 public:
  virtual ~GuardianKernel() = default;
  virtual KernelType type() const = 0;
  virtual Outcome on_packet(const Packet& pkt, KernelIo& io) = 0;
  virtual void on_message(const FabricPacket&, KernelIo&) {}
  /// True while the kernel cannot make progress without a mesh message.
  virtual bool waiting() const { return false; }
};

// ---------------------------------------------------------------------------
// PMC: per-kind event counters checked against [lo, hi] bounds

struct CounterBound {
  uint64_t lo = 0;
  uint64_t hi = UINT64_MAX;
};

struct PmcState {
  uint64_t window = 1000;  // trace cycles
  std::array<std::optional<CounterBound>, kNumKinds> bounds{};
  std::array<uint64_t, kNumKinds> counters{};
  std::array<bool, kNumKinds> reported{};
  std::optional<uint64_t> current_window;
};

struct Finding {
  uint64_t seq = 0;
  ViolationClass cls = ViolationClass::CounterBound;
  bool operator==(const Finding&) const = default;
};

/// Upper-bound crossings are flagged on the packet that crosses (once per kind
/// per window); lower-bound shortfalls are flagged on the packet that closes
/// the window. Both are COUNTER_BOUND.
std::vector<Finding> pmc_process(PmcState& state, const Packet& pkt);

// ---------------------------------------------------------------------------
// Shadow stack with segment spill/recall to a neighbouring engine

namespace ss_tag {
constexpr uint8_t kSpill = 1;
constexpr uint8_t kRecall = 2;
constexpr uint8_t kRefill = 3;
}  // namespace ss_tag

struct ShadowStackState {
  std::deque<uint64_t> stack;
  size_t spill_threshold = 64;  // 0 = never spill
  size_t recall_batch = 16;
  int spill_target = -1;        // engine holding spilled entries
  uint64_t spilled = 0;         // entries currently parked at spill_target
  bool awaiting_refill = false;
  size_t refill_expected = 0;
  std::vector<uint64_t> refill;
  std::vector<uint64_t> store;  // entries parked here by another engine
};

struct StackStep {
  std::optional<Finding> finding;
  bool blocked = false;
};

StackStep shadowstack_process(ShadowStackState& state, const Packet& pkt, KernelIo& io);
void shadowstack_message(ShadowStackState& state, const FabricPacket& msg, KernelIo& io);

// ---------------------------------------------------------------------------
// Shadow memory: non-overlapping regions keyed by base address

enum class RegionState : uint8_t { Valid, Freed };

class ShadowMemory {
 public:
  struct Region {
    uint64_t base = 0;
    uint64_t size = 0;
    RegionState state = RegionState::Valid;
  };

  /// Inserts [base, base+size), dropping any regions it overlaps.
  void allocate(uint64_t base, uint64_t size);
  /// Region starting exactly at base, if any.
  Region* find_base(uint64_t base);
  const Region* find(uint64_t addr) const;
  /// True when addr lies within `redzone` bytes outside some region.
  bool in_redzone(uint64_t addr, uint64_t redzone) const;
  void erase(uint64_t base);
  size_t size() const { return regions_.size(); }

 private:
  std::map<uint64_t, Region> regions_;
};

struct AsanState {
  ShadowMemory shadow;
  bool strict = false;
  uint64_t redzone = 16;
};

std::optional<Finding> asan_process(AsanState& state, const Packet& pkt);

struct UafState {
  ShadowMemory shadow;
  std::deque<std::pair<uint64_t, uint64_t>> quarantine;  // (base, size) in free order
  uint64_t quarantined_bytes = 0;
  uint64_t budget = 1 << 20;
  uint64_t evictions = 0;
};

std::optional<Finding> uaf_process(UafState& state, const Packet& pkt);

// ---------------------------------------------------------------------------
// Engine-facing wrappers

struct KernelParams {
  PmcState pmc;
  size_t spill_threshold = 64;
  size_t recall_batch = 16;
  bool asan_strict = false;
  uint64_t redzone = 16;
  uint64_t quarantine_budget = 1 << 20;
};

/// `spill_target` is only used by the shadow stack.
std::unique_ptr<GuardianKernel> make_kernel(KernelType type, const KernelParams& params,
                                            int spill_target);

}  // namespace fg
