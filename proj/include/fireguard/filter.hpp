#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fireguard/trace.hpp"

namespace fg {

constexpr unsigned kFilterTableSize = 1024;
constexpr unsigned kDefaultMaxGids = 256;

struct FilterEntry {
  uint8_t gid = 0;  // 0 = non-sensitive
  bool sel_prf = false;
  bool sel_lsq = false;
  bool sel_ftq = false;

  bool operator==(const FilterEntry&) const = default;
};

/// Table address: funct3 in the high 3 bits, opcode in the low 7.
constexpr unsigned filter_index(uint8_t opcode, uint8_t funct3) {
  return (static_cast<unsigned>(funct3 & 0x7) << 7) | (opcode & 0x7f);
}

class FilterTable {
 public:
  explicit FilterTable(unsigned max_gids = kDefaultMaxGids);

  void program(unsigned index, const FilterEntry& entry);
  const FilterEntry& at(unsigned index) const;
  const FilterEntry& lookup(uint8_t opcode, uint8_t funct3) const {
    return entries_[filter_index(opcode, funct3)];
  }
  unsigned max_gids() const { return max_gids_; }

  bool operator==(const FilterTable&) const = default;

 private:
  std::array<FilterEntry, kFilterTableSize> entries_{};
  unsigned max_gids_;
};

/// Value-returning form of FilterTable::program.
FilterTable table_program(FilterTable table, unsigned index, const FilterEntry& entry);

/// Table image: one `<index_hex> <gid> <P|-> <L|-> <F|->` line per entry.
FilterTable parse_filter_table(std::string_view text, unsigned max_gids = kDefaultMaxGids);
std::string serialize_filter_table(const FilterTable& table);

// Fixed 256-bit layout:
//   [63:0]    pc
//   [127:64]  memory or branch address (per the selected path, else 0)
//   [191:128] operand (when the PRF path is selected, else 0)
//   [193:192] valid code (01 when valid)
//   [200:194] opcode   [203:201] funct3   [211:204] gid   [215:212] kind
//   [255:216] low 40 bits of the trace commit stamp
struct Packet {
  std::array<uint64_t, 4> words{};
  uint64_t seq = 0;
  uint8_t gid = 0;
  bool valid = false;

  static constexpr unsigned kBits = 256;
  static constexpr uint64_t kValidCode = 0x1;
  static constexpr uint64_t kFillerSeq = ~0ULL;

  /// bits[offset+63 : offset]; offset + 64 must not exceed 256.
  uint64_t field(unsigned bit_offset) const;

  uint64_t pc() const { return words[0]; }
  uint64_t address() const { return words[1]; }
  uint64_t operand() const { return words[2]; }
  uint64_t valid_bits() const { return words[3] & 0x3; }
  uint8_t opcode() const { return static_cast<uint8_t>((words[3] >> 2) & 0x7f); }
  uint8_t funct3() const { return static_cast<uint8_t>((words[3] >> 9) & 0x7); }
  uint8_t meta_gid() const { return static_cast<uint8_t>((words[3] >> 12) & 0xff); }
  Kind kind() const { return static_cast<Kind>((words[3] >> 20) & 0xf); }
  uint64_t stamp() const { return words[3] >> 24; }

  static Packet invalid(uint64_t seq) {
    Packet p;
    p.seq = seq;
    return p;
  }
};

Packet classify(const FilterTable& table, const TraceRecord& rec);

/// Reorder FIFOs: one lane per mini-filter. Each accepted row writes exactly
/// one packet (valid, invalid or filler) into every lane, so lanes stay in
/// lock-step and the arbiter can rebuild commit order by scanning slots.
class ReorderFifo {
 public:
  ReorderFifo(unsigned lanes, size_t depth);

  struct StepResult {
    size_t accepted = 0;
    bool stalled = false;
  };

  /// Accepts the whole row or nothing. `row.size()` must not exceed lanes().
  StepResult push_row(std::span<const Packet> row);
  bool can_accept() const;

  struct ArbiterResult {
    std::optional<Packet> packet;
    size_t skipped = 0;  // invalid packets and fillers dropped this call
  };
  ArbiterResult arbiter_step();

  unsigned lanes() const { return static_cast<unsigned>(lanes_.size()); }
  size_t depth() const { return depth_; }
  size_t occupancy(unsigned lane) const { return lanes_[lane].size(); }
  size_t buffered() const;
  size_t buffered_valid() const;
  uint64_t rows_pushed(unsigned lane) const { return pushes_[lane]; }
  bool empty() const { return buffered() == 0; }
  bool any_full() const { return !can_accept(); }

 private:
  std::vector<std::deque<Packet>> lanes_;
  std::vector<uint64_t> pushes_;
  size_t depth_;
  unsigned cursor_ = 0;
};

/// Classifies up to lanes() records and pushes them as one row.
ReorderFifo::StepResult filter_step(ReorderFifo& fifo, const FilterTable& table,
                                    std::span<const TraceRecord> commits);

}  // namespace fg
