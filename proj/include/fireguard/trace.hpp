#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fireguard/common.hpp"

namespace fg {

enum class Kind : uint8_t {
  Alu = 0,
  Load,
  Store,
  Call,
  Ret,
  Jump,
  Alloc,
  Free,
  Other,
};
constexpr unsigned kNumKinds = 9;

std::string_view to_string(Kind kind);
std::optional<Kind> kind_from_string(std::string_view name);

constexpr bool carries_mem_addr(Kind k) {
  return k == Kind::Load || k == Kind::Store || k == Kind::Alloc || k == Kind::Free;
}
constexpr bool carries_br_target(Kind k) {
  return k == Kind::Call || k == Kind::Ret || k == Kind::Jump;
}

// RISC-V major opcodes used by the generator and the default filter table.
namespace opcode {
constexpr uint8_t kLoad = 0x03;
constexpr uint8_t kCustom0 = 0x0b;  // allocator events: funct3 0 = alloc, 1 = free
constexpr uint8_t kOpImm = 0x13;
constexpr uint8_t kStore = 0x23;
constexpr uint8_t kOp = 0x33;
constexpr uint8_t kBranch = 0x63;
constexpr uint8_t kJalr = 0x67;
constexpr uint8_t kJal = 0x6f;
constexpr uint8_t kSystem = 0x73;
}  // namespace opcode

struct TraceRecord {
  uint64_t seq = 0;
  uint64_t cycle = 0;
  uint64_t pc = 0;
  uint8_t opcode = 0;
  uint8_t funct3 = 0;
  Kind kind = Kind::Other;
  uint64_t operand = 0;  // register result; allocation size for Alloc
  std::optional<uint64_t> mem_addr;
  std::optional<uint64_t> br_target;

  bool operator==(const TraceRecord&) const = default;
};

TraceRecord make_alloc(uint64_t seq, uint64_t cycle, uint64_t base, uint64_t size);
TraceRecord make_free(uint64_t seq, uint64_t cycle, uint64_t base);

struct Trace {
  unsigned commit_width = 4;
  std::vector<TraceRecord> records;

  bool operator==(const Trace&) const = default;
};

/// Parses the line-oriented FGTRACE format. Throws Error(Parse) naming the
/// offending line, or Error(Ordering) on seq/cycle regressions.
Trace parse_trace(std::string_view text);
std::string serialize_trace(const Trace& trace);

/// Checks every TraceRecord invariant; throws on the first violation.
void validate_trace(const Trace& trace);

struct WorkloadProfile {
  std::string name = "default";
  unsigned commit_width = 4;
  double load = 0.25;
  double store = 0.12;
  double call_ret = 0.06;
  double jump = 0.08;
  // Remaining probability mass goes to ALU records.
  double alloc_rate = 0.004;   // per-record chance of an allocator event
  double free_fraction = 0.45; // of allocator events, share that are frees
  unsigned max_live_regions = 48;
  unsigned max_call_depth = 48;
  double noise = 0.0;          // fraction of accesses outside tracked regions
  double idle = 0.1;           // chance of a baseline bubble between groups
  unsigned max_group = 0;      // 0 = commit_width
};

WorkloadProfile profile_by_name(std::string_view name);
std::vector<std::string> profile_names();
void validate_profile(const WorkloadProfile& profile);

/// Deterministic for (profile, seed, length). Every field is drawn from its
/// own counter-indexed stream so values do not depend on generation order.
Trace generate_synthetic(const WorkloadProfile& profile, uint64_t seed, size_t length);

enum class AttackMode : uint8_t { HijackRet, OobAccess, UafAccess, CounterFlood };
enum class ViolationClass : uint8_t { RetMismatch, Oob, Uaf, CounterBound };

std::string_view to_string(AttackMode mode);
std::optional<AttackMode> attack_mode_from_string(std::string_view name);
std::string_view to_string(ViolationClass cls);
std::optional<ViolationClass> violation_from_string(std::string_view name);

struct AttackSpec {
  uint64_t seq = 0;
  AttackMode mode = AttackMode::HijackRet;
  // Forged target/address; for CounterFlood, the number of records inserted.
  uint64_t payload = 0;
};

struct GroundTruth {
  uint64_t seq = 0;
  ViolationClass expected = ViolationClass::RetMismatch;
  uint64_t count = 1;  // records touched (flood size for CounterFlood)

  bool operator==(const GroundTruth&) const = default;
};

struct Injection {
  Trace trace;
  GroundTruth truth;
};

Injection inject_attack(const Trace& trace, const AttackSpec& spec);

/// Applies several attacks, highest seq first, and returns ground truth in
/// the coordinates of the final trace.
struct MultiInjection {
  Trace trace;
  std::vector<GroundTruth> truths;
};
MultiInjection inject_attacks(const Trace& trace, std::vector<AttackSpec> specs);

/// Picks up to `count` valid attack sites of one mode. Payloads are chosen so
/// the attack is detectable: HIJACK_RET flips bit 12 of the target, OOB lands
/// in the 16 bytes past a live region, UAF lands in the most recently freed
/// region, and COUNTER_FLOOD inserts `flood` loads.
std::vector<AttackSpec> plan_attacks(const Trace& trace, AttackMode mode, size_t count,
                                     uint64_t seed, uint64_t flood = 64);

std::string serialize_ground_truth(const std::vector<GroundTruth>& truths);
std::vector<GroundTruth> parse_ground_truth(std::string_view text);

}  // namespace fg
