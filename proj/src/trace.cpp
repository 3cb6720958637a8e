#include "fireguard/trace.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <map>

namespace fg {

namespace {

constexpr std::array<std::string_view, kNumKinds> kKindNames = {
    "ALU", "LOAD", "STORE", "CALL", "RET", "JUMP", "ALLOC", "FREE", "OTHER"};

constexpr std::array<std::string_view, 4> kAttackNames = {
    "HIJACK_RET", "OOB_ACCESS", "UAF_ACCESS", "COUNTER_FLOOD"};

constexpr std::array<std::string_view, 4> kViolationNames = {
    "RET_MISMATCH", "OOB", "UAF", "COUNTER_BOUND"};

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

[[noreturn]] void parse_fail(size_t line_no, const std::string& msg) {
  fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + msg);
}

uint64_t parse_dec(std::string_view tok, size_t line_no, const char* field) {
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v, 10);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    parse_fail(line_no, std::string("bad decimal ") + field + " '" + std::string(tok) + "'");
  }
  return v;
}

uint64_t parse_hex(std::string_view tok, size_t line_no, const char* field) {
  if (tok.size() < 3 || tok[0] != '0' || (tok[1] != 'x' && tok[1] != 'X')) {
    parse_fail(line_no, std::string("expected 0x-prefixed ") + field + " '" + std::string(tok) + "'");
  }
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(tok.data() + 2, tok.data() + tok.size(), v, 16);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    parse_fail(line_no, std::string("bad hex ") + field + " '" + std::string(tok) + "'");
  }
  return v;
}

std::optional<uint64_t> parse_opt_hex(std::string_view tok, size_t line_no, const char* field) {
  if (tok == "-") return std::nullopt;
  return parse_hex(tok, line_no, field);
}

void check_record_shape(const TraceRecord& r, const std::string& where) {
  if (r.opcode > 0x7f) fail(ErrorKind::Parse, where + "opcode exceeds 7 bits");
  if (r.funct3 > 7) fail(ErrorKind::Parse, where + "funct3 exceeds 3 bits");
  if (r.mem_addr.has_value() != carries_mem_addr(r.kind)) {
    fail(ErrorKind::Parse, where + "mem_addr presence does not match kind " +
                               std::string(to_string(r.kind)));
  }
  if (r.br_target.has_value() != carries_br_target(r.kind)) {
    fail(ErrorKind::Parse, where + "br_target presence does not match kind " +
                               std::string(to_string(r.kind)));
  }
}

std::string hex(uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string_view to_string(Kind kind) { return kKindNames[static_cast<size_t>(kind)]; }

std::optional<Kind> kind_from_string(std::string_view name) {
  for (size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<Kind>(i);
  }
  return std::nullopt;
}

std::string_view to_string(AttackMode mode) { return kAttackNames[static_cast<size_t>(mode)]; }

std::optional<AttackMode> attack_mode_from_string(std::string_view name) {
  for (size_t i = 0; i < kAttackNames.size(); ++i) {
    if (kAttackNames[i] == name) return static_cast<AttackMode>(i);
  }
  return std::nullopt;
}

std::string_view to_string(ViolationClass cls) { return kViolationNames[static_cast<size_t>(cls)]; }

std::optional<ViolationClass> violation_from_string(std::string_view name) {
  for (size_t i = 0; i < kViolationNames.size(); ++i) {
    if (kViolationNames[i] == name) return static_cast<ViolationClass>(i);
  }
  return std::nullopt;
}

TraceRecord make_alloc(uint64_t seq, uint64_t cycle, uint64_t base, uint64_t size) {
  TraceRecord r;
  r.seq = seq;
  r.cycle = cycle;
  r.opcode = opcode::kCustom0;
  r.funct3 = 0;
  r.kind = Kind::Alloc;
  r.operand = size;
  r.mem_addr = base;
  return r;
}

TraceRecord make_free(uint64_t seq, uint64_t cycle, uint64_t base) {
  TraceRecord r;
  r.seq = seq;
  r.cycle = cycle;
  r.opcode = opcode::kCustom0;
  r.funct3 = 1;
  r.kind = Kind::Free;
  r.mem_addr = base;
  return r;
}

void validate_trace(const Trace& trace) {
  if (trace.commit_width == 0) fail(ErrorKind::Parse, "commit_width must be positive");
  const TraceRecord* prev = nullptr;
  unsigned same_cycle = 0;
  for (const auto& r : trace.records) {
    const std::string where = "seq " + std::to_string(r.seq) + ": ";
    check_record_shape(r, where);
    if (prev != nullptr) {
      if (r.seq <= prev->seq) fail(ErrorKind::Ordering, where + "seq does not strictly increase");
      if (r.cycle < prev->cycle) fail(ErrorKind::Ordering, where + "cycle decreases");
      same_cycle = (r.cycle == prev->cycle) ? same_cycle + 1 : 1;
    } else {
      same_cycle = 1;
    }
    if (same_cycle > trace.commit_width) {
      fail(ErrorKind::Ordering, where + "more than commit_width records in one cycle");
    }
    prev = &r;
  }
}

Trace parse_trace(std::string_view text) {
  Trace trace;
  bool have_header = false;
  size_t line_no = 0;
  size_t pos = 0;
  const TraceRecord* prev = nullptr;
  unsigned same_cycle = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    auto tok = split_ws(line);
    if (tok.empty() || tok[0][0] == '#') {
      if (nl == text.size()) break;
      continue;
    }
    if (!have_header) {
      if (tok.size() != 3 || tok[0] != "FGTRACE") parse_fail(line_no, "missing FGTRACE header");
      if (tok[1] != "1") parse_fail(line_no, "unsupported trace version " + std::string(tok[1]));
      uint64_t w = parse_dec(tok[2], line_no, "commit_width");
      if (w == 0 || w > 64) parse_fail(line_no, "commit_width out of range");
      trace.commit_width = static_cast<unsigned>(w);
      have_header = true;
      continue;
    }
    TraceRecord r;
    if (tok[0] == "R") {
      if (tok.size() != 10) parse_fail(line_no, "R record needs 10 fields");
      r.seq = parse_dec(tok[1], line_no, "seq");
      r.cycle = parse_dec(tok[2], line_no, "cycle");
      r.pc = parse_hex(tok[3], line_no, "pc");
      uint64_t op = parse_hex(tok[4], line_no, "opcode");
      if (op > 0x7f) parse_fail(line_no, "opcode exceeds 7 bits");
      uint64_t f3 = parse_hex(tok[5], line_no, "funct3");
      if (f3 > 7) parse_fail(line_no, "funct3 exceeds 3 bits");
      r.opcode = static_cast<uint8_t>(op);
      r.funct3 = static_cast<uint8_t>(f3);
      r.operand = parse_hex(tok[6], line_no, "operand");
      r.mem_addr = parse_opt_hex(tok[7], line_no, "mem_addr");
      r.br_target = parse_opt_hex(tok[8], line_no, "br_target");
      auto kind = kind_from_string(tok[9]);
      if (!kind) parse_fail(line_no, "unknown kind '" + std::string(tok[9]) + "'");
      if (*kind == Kind::Alloc || *kind == Kind::Free) {
        parse_fail(line_no, "allocator events use A/F lines");
      }
      r.kind = *kind;
    } else if (tok[0] == "A") {
      if (tok.size() != 5) parse_fail(line_no, "A record needs 5 fields");
      r = make_alloc(parse_dec(tok[1], line_no, "seq"), parse_dec(tok[2], line_no, "cycle"),
                     parse_hex(tok[3], line_no, "addr"), parse_dec(tok[4], line_no, "size"));
    } else if (tok[0] == "F") {
      if (tok.size() != 4) parse_fail(line_no, "F record needs 4 fields");
      r = make_free(parse_dec(tok[1], line_no, "seq"), parse_dec(tok[2], line_no, "cycle"),
                    parse_hex(tok[3], line_no, "addr"));
    } else {
      parse_fail(line_no, "unknown record tag '" + std::string(tok[0]) + "'");
    }
    try {
      check_record_shape(r, "");
    } catch (const Error& e) {
      parse_fail(line_no, e.what());
    }
    if (prev != nullptr) {
      if (r.seq <= prev->seq) {
        fail(ErrorKind::Ordering, "line " + std::to_string(line_no) + ": seq regression");
      }
      if (r.cycle < prev->cycle) {
        fail(ErrorKind::Ordering, "line " + std::to_string(line_no) + ": cycle regression");
      }
      same_cycle = (r.cycle == prev->cycle) ? same_cycle + 1 : 1;
    } else {
      same_cycle = 1;
    }
    if (same_cycle > trace.commit_width) {
      fail(ErrorKind::Ordering,
           "line " + std::to_string(line_no) + ": more than commit_width records in one cycle");
    }
    trace.records.push_back(r);
    prev = &trace.records.back();
    if (nl == text.size()) break;
  }
  if (!have_header) fail(ErrorKind::Parse, "line 1: missing FGTRACE header");
  return trace;
}

std::string serialize_trace(const Trace& trace) {
  std::string out = "FGTRACE 1 " + std::to_string(trace.commit_width) + "\n";
  out.reserve(out.size() + trace.records.size() * 48);
  char buf[256];
  for (const auto& r : trace.records) {
    switch (r.kind) {
      case Kind::Alloc:
        std::snprintf(buf, sizeof buf, "A %llu %llu %s %llu\n",
                      static_cast<unsigned long long>(r.seq),
                      static_cast<unsigned long long>(r.cycle), hex(*r.mem_addr).c_str(),
                      static_cast<unsigned long long>(r.operand));
        break;
      case Kind::Free:
        std::snprintf(buf, sizeof buf, "F %llu %llu %s\n", static_cast<unsigned long long>(r.seq),
                      static_cast<unsigned long long>(r.cycle), hex(*r.mem_addr).c_str());
        break;
      default:
        std::snprintf(buf, sizeof buf, "R %llu %llu %s 0x%02x 0x%x %s %s %s %s\n",
                      static_cast<unsigned long long>(r.seq),
                      static_cast<unsigned long long>(r.cycle), hex(r.pc).c_str(), r.opcode,
                      r.funct3, hex(r.operand).c_str(),
                      r.mem_addr ? hex(*r.mem_addr).c_str() : "-",
                      r.br_target ? hex(*r.br_target).c_str() : "-",
                      std::string(to_string(r.kind)).c_str());
        break;
    }
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generation

namespace {

enum Stream : uint64_t {
  kPacing = 1,
  kKindChoice,
  kSubChoice,
  kAddress,
  kValue,
  kSize,
  kTarget,
  kNoise,
  kFunct,
};

class FieldRng {
 public:
  explicit FieldRng(uint64_t seed) : seed_(mix64(seed ^ 0x46474e45ULL)) {}

  uint64_t draw(Stream s, uint64_t index) const {
    return mix64(mix64(seed_ + static_cast<uint64_t>(s) * 0x9e3779b97f4a7c15ULL) ^ index);
  }
  double unit(Stream s, uint64_t index) const {
    return static_cast<double>(draw(s, index) >> 11) * 0x1.0p-53;
  }
  uint64_t below(Stream s, uint64_t index, uint64_t n) const {
    return static_cast<uint64_t>((static_cast<unsigned __int128>(draw(s, index)) * n) >> 64);
  }

 private:
  uint64_t seed_;
};

struct Region {
  uint64_t base;
  uint64_t size;
};

constexpr uint64_t kHeapBase = 0x10000000;
constexpr uint64_t kNoiseBase = 0x7ff000000000ULL;
constexpr uint64_t kCodeBase = 0x10000;
constexpr uint64_t kFuncBase = 0x40000;

}  // namespace

void validate_profile(const WorkloadProfile& p) {
  auto bad = [](double v) { return !(v >= 0.0 && v <= 1.0); };
  if (bad(p.load) || bad(p.store) || bad(p.call_ret) || bad(p.jump) || bad(p.alloc_rate) ||
      bad(p.free_fraction) || bad(p.noise) || bad(p.idle)) {
    fail(ErrorKind::Config, "profile ratios must lie in [0,1]");
  }
  if (p.load + p.store + p.call_ret + p.jump > 1.0 + 1e-12) {
    fail(ErrorKind::Config, "profile mix ratios sum to more than 1");
  }
  if (p.commit_width == 0 || p.commit_width > 64) fail(ErrorKind::Config, "bad commit_width");
  if (p.max_group > p.commit_width) fail(ErrorKind::Config, "max_group exceeds commit_width");
  if (p.max_live_regions == 0) fail(ErrorKind::Config, "max_live_regions must be positive");
}

std::vector<std::string> profile_names() {
  return {"default", "asan-heavy", "call-heavy", "pmc", "sparse", "alu-only"};
}

WorkloadProfile profile_by_name(std::string_view name) {
  WorkloadProfile p;
  p.name = std::string(name);
  if (name == "default") return p;
  if (name == "asan-heavy") {
    p.load = 0.32;
    p.store = 0.18;
    p.call_ret = 0.04;
    p.jump = 0.06;
    p.alloc_rate = 0.006;
    return p;
  }
  if (name == "call-heavy") {
    p.load = 0.15;
    p.store = 0.08;
    p.call_ret = 0.2;
    p.jump = 0.08;
    return p;
  }
  if (name == "pmc") {
    p.load = 0.1;
    p.store = 0.06;
    p.call_ret = 0.02;
    p.jump = 0.1;
    p.idle = 0.3;
    return p;
  }
  if (name == "sparse") {
    p.load = 0.02;
    p.store = 0.01;
    p.call_ret = 0.01;
    p.jump = 0.02;
    p.alloc_rate = 0.001;
    p.idle = 0.5;
    p.max_group = 2;
    return p;
  }
  if (name == "alu-only") {
    p.load = p.store = p.call_ret = p.jump = 0.0;
    p.alloc_rate = 0.0;
    return p;
  }
  fail(ErrorKind::Config, "unknown profile '" + std::string(name) + "'");
}

Trace generate_synthetic(const WorkloadProfile& p, uint64_t seed, size_t length) {
  validate_profile(p);
  const FieldRng rng(seed);
  const unsigned max_group = p.max_group ? p.max_group : p.commit_width;

  Trace trace;
  trace.commit_width = p.commit_width;
  trace.records.reserve(length);

  std::vector<Region> live;
  std::vector<uint64_t> stack;
  uint64_t heap_next = kHeapBase;
  uint64_t pc = kCodeBase;
  uint64_t cycle = 0;
  uint64_t group_no = 0;
  unsigned group_size = 1 + static_cast<unsigned>(rng.below(kPacing, 0, max_group));
  unsigned in_group = 0;

  for (size_t i = 0; i < length; ++i) {
    if (in_group == group_size) {
      ++group_no;
      cycle += 1;
      if (rng.unit(kPacing, group_no * 3 + 1) < p.idle) {
        cycle += 1 + rng.below(kPacing, group_no * 3 + 2, 3);
      }
      group_size = 1 + static_cast<unsigned>(rng.below(kPacing, group_no * 3, max_group));
      in_group = 0;
    }
    ++in_group;

    const size_t remaining = length - i;  // includes this record
    const size_t depth = stack.size();
    Kind kind = Kind::Alu;

    if (depth > 0 && depth >= remaining) {
      kind = Kind::Ret;
    } else {
      double u = rng.unit(kKindChoice, i);
      if (u < p.alloc_rate) {
        bool do_free = !live.empty() &&
                       (live.size() >= p.max_live_regions || rng.unit(kSubChoice, i) < p.free_fraction);
        kind = do_free ? Kind::Free : Kind::Alloc;
      } else {
        double v = (p.alloc_rate < 1.0) ? (u - p.alloc_rate) / (1.0 - p.alloc_rate) : 0.0;
        if (v < p.load) {
          kind = Kind::Load;
        } else if (v < p.load + p.store) {
          kind = Kind::Store;
        } else if (v < p.load + p.store + p.call_ret) {
          bool want_call = depth == 0 ||
                           (depth < p.max_call_depth && rng.unit(kSubChoice, i) < 0.5);
          // A call must leave room to unwind before the trace ends.
          if (want_call && remaining >= depth + 2) {
            kind = Kind::Call;
          } else if (depth > 0) {
            kind = Kind::Ret;
          } else {
            kind = Kind::Alu;
          }
        } else if (v < p.load + p.store + p.call_ret + p.jump) {
          kind = Kind::Jump;
        }
      }
      if ((kind == Kind::Load || kind == Kind::Store) && live.empty() &&
          !(p.noise > 0.0 && rng.unit(kNoise, i) < p.noise)) {
        kind = Kind::Alloc;
      }
    }

    TraceRecord r;
    r.seq = i;
    r.cycle = cycle;
    r.kind = kind;
    switch (kind) {
      case Kind::Load:
      case Kind::Store: {
        const uint8_t f3 = static_cast<uint8_t>(rng.below(kFunct, i, 4));
        const uint64_t width = 1ULL << f3;
        r.opcode = kind == Kind::Load ? opcode::kLoad : opcode::kStore;
        r.funct3 = f3;
        r.pc = pc;
        r.operand = rng.draw(kValue, i);
        if (live.empty() || (p.noise > 0.0 && rng.unit(kNoise, i) < p.noise)) {
          r.mem_addr = kNoiseBase + (rng.below(kAddress, i, 1 << 20) & ~(width - 1));
        } else {
          const Region& reg = live[rng.below(kAddress, i, live.size())];
          uint64_t slots = reg.size / width;
          r.mem_addr = reg.base + rng.below(kSize, i, slots) * width;
        }
        pc += 4;
        break;
      }
      case Kind::Call:
        r.opcode = opcode::kJal;
        r.funct3 = 0;
        r.pc = pc;
        r.br_target = kFuncBase + rng.below(kTarget, i, 1024) * 0x100;
        r.operand = pc + 4;
        stack.push_back(pc + 4);
        pc = *r.br_target;
        break;
      case Kind::Ret:
        r.opcode = opcode::kJalr;
        r.funct3 = 0;
        r.pc = pc;
        r.br_target = stack.back();
        stack.pop_back();
        pc = *r.br_target;
        break;
      case Kind::Jump: {
        static constexpr uint8_t kBranchF3[6] = {0, 1, 4, 5, 6, 7};
        r.opcode = opcode::kBranch;
        r.funct3 = kBranchF3[rng.below(kFunct, i, 6)];
        r.pc = pc;
        int64_t off = static_cast<int64_t>(rng.below(kTarget, i, 64)) - 32;
        if (off == 0) off = 1;
        r.br_target = pc + static_cast<uint64_t>(off * 4);
        pc = *r.br_target;
        break;
      }
      case Kind::Alloc: {
        uint64_t size = 16 + 8 * rng.below(kSize, i, 31);
        r = make_alloc(i, cycle, heap_next, size);
        live.push_back({heap_next, size});
        // Regions are never reused, and neighbours are at least 64 bytes apart.
        heap_next += ((size + 15) & ~15ULL) + 64;
        break;
      }
      case Kind::Free: {
        size_t idx = rng.below(kAddress, i, live.size());
        r = make_free(i, cycle, live[idx].base);
        live[idx] = live.back();
        live.pop_back();
        break;
      }
      default:
        r.opcode = rng.unit(kSubChoice, i) < 0.5 ? opcode::kOpImm : opcode::kOp;
        r.funct3 = static_cast<uint8_t>(rng.below(kFunct, i, 8));
        r.pc = pc;
        r.operand = rng.draw(kValue, i);
        pc += 4;
        break;
    }
    trace.records.push_back(r);
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Attack injection

namespace {

size_t index_of_seq(const Trace& trace, uint64_t seq) {
  auto it = std::lower_bound(trace.records.begin(), trace.records.end(), seq,
                             [](const TraceRecord& r, uint64_t s) { return r.seq < s; });
  if (it == trace.records.end() || it->seq != seq) {
    fail(ErrorKind::Injection, "no record with seq " + std::to_string(seq));
  }
  return static_cast<size_t>(it - trace.records.begin());
}

struct HeapReplay {
  std::map<uint64_t, uint64_t> live;   // base -> size
  std::map<uint64_t, uint64_t> freed;  // base -> size, most recent lifetime

  void apply(const TraceRecord& r) {
    if (r.kind == Kind::Alloc) {
      freed.erase(*r.mem_addr);
      live[*r.mem_addr] = r.operand;
    } else if (r.kind == Kind::Free) {
      auto it = live.find(*r.mem_addr);
      if (it != live.end()) {
        freed[it->first] = it->second;
        live.erase(it);
      }
    }
  }

  static bool contains(const std::map<uint64_t, uint64_t>& m, uint64_t addr) {
    auto it = m.upper_bound(addr);
    if (it == m.begin()) return false;
    --it;
    return addr < it->first + it->second;
  }
};

}  // namespace

Injection inject_attack(const Trace& trace, const AttackSpec& spec) {
  const size_t idx = index_of_seq(trace, spec.seq);
  const TraceRecord& target = trace.records[idx];
  Injection out{trace, {spec.seq, ViolationClass::RetMismatch, 1}};
  TraceRecord& rec = out.trace.records[idx];

  auto replay_until = [&] {
    HeapReplay h;
    for (size_t i = 0; i < idx; ++i) h.apply(trace.records[i]);
    return h;
  };

  switch (spec.mode) {
    case AttackMode::HijackRet:
      if (target.kind != Kind::Ret) fail(ErrorKind::Injection, "HIJACK_RET needs a RET record");
      if (*target.br_target == spec.payload) {
        fail(ErrorKind::Injection, "HIJACK_RET payload equals the genuine return address");
      }
      rec.br_target = spec.payload;
      out.truth.expected = ViolationClass::RetMismatch;
      break;
    case AttackMode::OobAccess: {
      if (target.kind != Kind::Load && target.kind != Kind::Store) {
        fail(ErrorKind::Injection, "OOB_ACCESS needs a LOAD or STORE record");
      }
      HeapReplay h = replay_until();
      if (HeapReplay::contains(h.live, spec.payload)) {
        fail(ErrorKind::Injection, "OOB_ACCESS payload lies inside a live region");
      }
      rec.mem_addr = spec.payload;
      out.truth.expected = ViolationClass::Oob;
      break;
    }
    case AttackMode::UafAccess: {
      if (target.kind != Kind::Load && target.kind != Kind::Store) {
        fail(ErrorKind::Injection, "UAF_ACCESS needs a LOAD or STORE record");
      }
      HeapReplay h = replay_until();
      if (!HeapReplay::contains(h.freed, spec.payload) ||
          HeapReplay::contains(h.live, spec.payload)) {
        fail(ErrorKind::Injection, "UAF_ACCESS payload is not inside a freed region");
      }
      rec.mem_addr = spec.payload;
      out.truth.expected = ViolationClass::Uaf;
      break;
    }
    case AttackMode::CounterFlood: {
      if (spec.payload == 0 || spec.payload > 1'000'000) {
        fail(ErrorKind::Injection, "COUNTER_FLOOD count must be in [1, 1000000]");
      }
      const uint64_t n = spec.payload;
      const unsigned w = trace.commit_width;
      const uint64_t extra_cycles = (n + w - 1) / w;
      std::vector<TraceRecord> recs;
      recs.reserve(trace.records.size() + n);
      recs.insert(recs.end(), trace.records.begin(), trace.records.begin() + idx + 1);
      for (uint64_t k = 0; k < n; ++k) {
        TraceRecord c = target;
        c.seq = target.seq + 1 + k;
        c.cycle = target.cycle + 1 + k / w;
        recs.push_back(c);
      }
      for (size_t i = idx + 1; i < trace.records.size(); ++i) {
        TraceRecord c = trace.records[i];
        c.seq += n;
        c.cycle += extra_cycles + 1;
        recs.push_back(c);
      }
      out.trace.records = std::move(recs);
      out.truth = {target.seq + 1, ViolationClass::CounterBound, n};
      break;
    }
  }
  return out;
}

MultiInjection inject_attacks(const Trace& trace, std::vector<AttackSpec> specs) {
  std::sort(specs.begin(), specs.end(),
            [](const AttackSpec& a, const AttackSpec& b) { return a.seq > b.seq; });
  for (size_t i = 1; i < specs.size(); ++i) {
    if (specs[i].seq == specs[i - 1].seq) {
      fail(ErrorKind::Injection, "two attacks target seq " + std::to_string(specs[i].seq));
    }
  }
  MultiInjection out{trace, {}};
  for (const auto& s : specs) {
    Injection inj = inject_attack(out.trace, s);
    if (s.mode == AttackMode::CounterFlood) {
      for (auto& t : out.truths) t.seq += s.payload;
    }
    out.trace = std::move(inj.trace);
    out.truths.push_back(inj.truth);
  }
  std::sort(out.truths.begin(), out.truths.end(),
            [](const GroundTruth& a, const GroundTruth& b) { return a.seq < b.seq; });
  return out;
}

std::vector<AttackSpec> plan_attacks(const Trace& trace, AttackMode mode, size_t count,
                                     uint64_t seed, uint64_t flood) {
  std::vector<AttackSpec> cands;
  HeapReplay h;
  std::optional<std::pair<uint64_t, uint64_t>> last_freed;
  for (const TraceRecord& r : trace.records) {
    const uint64_t draw = mix64(seed ^ mix64(r.seq));
    const bool mem = r.kind == Kind::Load || r.kind == Kind::Store;
    switch (mode) {
      case AttackMode::HijackRet:
        if (r.kind == Kind::Ret) cands.push_back({r.seq, mode, *r.br_target ^ 0x1000});
        break;
      case AttackMode::OobAccess:
        if (mem && !h.live.empty()) {
          auto it = h.live.begin();
          std::advance(it, static_cast<long>(draw % h.live.size()));
          const uint64_t addr = it->first + it->second + (draw >> 32) % 16;
          if (!HeapReplay::contains(h.live, addr)) cands.push_back({r.seq, mode, addr});
        }
        break;
      case AttackMode::UafAccess:
        if (mem && last_freed && !HeapReplay::contains(h.live, last_freed->first)) {
          cands.push_back({r.seq, mode, last_freed->first + (draw >> 32) % last_freed->second});
        }
        break;
      case AttackMode::CounterFlood:
        if (r.kind == Kind::Load) cands.push_back({r.seq, mode, flood});
        break;
    }
    if (r.kind == Kind::Free && h.live.count(*r.mem_addr)) {
      last_freed = std::make_pair(*r.mem_addr, h.live[*r.mem_addr]);
    }
    h.apply(r);
  }
  // Deterministic partial shuffle, then restore trace order.
  const size_t n = std::min(count, cands.size());
  for (size_t i = 0; i < n; ++i) {
    size_t j = i + static_cast<size_t>(mix64(seed + 0x9e37 * (i + 1)) % (cands.size() - i));
    std::swap(cands[i], cands[j]);
  }
  cands.resize(n);
  std::sort(cands.begin(), cands.end(),
            [](const AttackSpec& a, const AttackSpec& b) { return a.seq < b.seq; });
  return cands;
}

std::string serialize_ground_truth(const std::vector<GroundTruth>& truths) {
  std::string out = "FGTRUTH 1\n";
  for (const auto& t : truths) {
    out += "G " + std::to_string(t.seq) + " " + std::string(to_string(t.expected)) + " " +
           std::to_string(t.count) + "\n";
  }
  return out;
}

std::vector<GroundTruth> parse_ground_truth(std::string_view text) {
  std::vector<GroundTruth> out;
  size_t pos = 0;
  size_t line_no = 0;
  bool header = false;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto tok = split_ws(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (tok.empty() || tok[0][0] == '#') continue;
    if (!header) {
      if (tok.size() != 2 || tok[0] != "FGTRUTH" || tok[1] != "1") {
        parse_fail(line_no, "missing FGTRUTH header");
      }
      header = true;
      continue;
    }
    if (tok.size() != 4 || tok[0] != "G") parse_fail(line_no, "expected 'G <seq> <class> <count>'");
    auto cls = violation_from_string(tok[2]);
    if (!cls) parse_fail(line_no, "unknown violation class");
    out.push_back({parse_dec(tok[1], line_no, "seq"), *cls, parse_dec(tok[3], line_no, "count")});
  }
  if (!header) fail(ErrorKind::Parse, "line 1: missing FGTRUTH header");
  return out;
}

}  // namespace fg
