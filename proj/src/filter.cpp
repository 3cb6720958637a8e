#include "fireguard/filter.hpp"

#include <charconv>
#include <cstdio>

namespace fg {

FilterTable::FilterTable(unsigned max_gids) : max_gids_(max_gids) {
  if (max_gids == 0 || max_gids > 256) fail(ErrorKind::Config, "max_gids must be in [1,256]");
}

void FilterTable::program(unsigned index, const FilterEntry& entry) {
  if (index >= kFilterTableSize) {
    fail(ErrorKind::Config, "filter index " + std::to_string(index) + " out of range");
  }
  if (entry.gid >= max_gids_) {
    fail(ErrorKind::Config, "gid " + std::to_string(entry.gid) + " >= max_gids");
  }
  if (entry.gid != 0 && !(entry.sel_prf || entry.sel_lsq || entry.sel_ftq)) {
    fail(ErrorKind::Config, "sensitive filter entry selects no data path");
  }
  entries_[index] = entry;
}

const FilterEntry& FilterTable::at(unsigned index) const {
  if (index >= kFilterTableSize) {
    fail(ErrorKind::Config, "filter index " + std::to_string(index) + " out of range");
  }
  return entries_[index];
}

FilterTable table_program(FilterTable table, unsigned index, const FilterEntry& entry) {
  table.program(index, entry);
  return table;
}

FilterTable parse_filter_table(std::string_view text, unsigned max_gids) {
  FilterTable table(max_gids);
  size_t pos = 0;
  size_t line_no = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    char idx_s[32], p[8], l[8], f[8];
    unsigned gid = 0;
    int n = std::sscanf(line.c_str(), " %31s %u %7s %7s %7s", idx_s, &gid, p, l, f);
    if (n <= 0) continue;
    auto bad = [&](const std::string& why) {
      fail(ErrorKind::Parse, "filter table line " + std::to_string(line_no) + ": " + why);
    };
    if (n != 5) bad("expected '<index_hex> <gid> <P|-> <L|-> <F|->'");
    std::string_view is(idx_s);
    if (is.size() > 2 && is[0] == '0' && (is[1] == 'x' || is[1] == 'X')) is.remove_prefix(2);
    unsigned index = 0;
    auto [ptr, ec] = std::from_chars(is.data(), is.data() + is.size(), index, 16);
    if (ec != std::errc() || ptr != is.data() + is.size()) bad("bad index");
    auto flag = [&](const char* s, char want) -> bool {
      if (s[0] == want && s[1] == 0) return true;
      if (s[0] == '-' && s[1] == 0) return false;
      bad(std::string("bad select flag '") + s + "'");
      return false;
    };
    FilterEntry e;
    if (gid > 255) bad("gid exceeds 8 bits");
    e.gid = static_cast<uint8_t>(gid);
    e.sel_prf = flag(p, 'P');
    e.sel_lsq = flag(l, 'L');
    e.sel_ftq = flag(f, 'F');
    try {
      table.program(index, e);
    } catch (const Error& err) {
      bad(err.what());
    }
  }
  return table;
}

std::string serialize_filter_table(const FilterTable& table) {
  std::string out;
  char buf[64];
  for (unsigned i = 0; i < kFilterTableSize; ++i) {
    const FilterEntry& e = table.at(i);
    if (e == FilterEntry{}) continue;
    std::snprintf(buf, sizeof buf, "0x%03x %u %c %c %c\n", i, e.gid, e.sel_prf ? 'P' : '-',
                  e.sel_lsq ? 'L' : '-', e.sel_ftq ? 'F' : '-');
    out += buf;
  }
  return out;
}

uint64_t Packet::field(unsigned bit_offset) const {
  if (bit_offset + 64 > kBits) {
    fail(ErrorKind::Fault, "bitfield offset " + std::to_string(bit_offset) + " overflows packet");
  }
  const unsigned w = bit_offset / 64;
  const unsigned s = bit_offset % 64;
  if (s == 0) return words[w];
  return (words[w] >> s) | (words[w + 1] << (64 - s));
}

Packet classify(const FilterTable& table, const TraceRecord& rec) {
  const FilterEntry& e = table.lookup(rec.opcode, rec.funct3);
  if (e.gid == 0) return Packet::invalid(rec.seq);
  Packet p;
  p.seq = rec.seq;
  p.gid = e.gid;
  p.valid = true;
  p.words[0] = rec.pc;
  if (e.sel_lsq && rec.mem_addr) {
    p.words[1] = *rec.mem_addr;
  } else if (e.sel_ftq && rec.br_target) {
    p.words[1] = *rec.br_target;
  }
  if (e.sel_prf) p.words[2] = rec.operand;
  p.words[3] = Packet::kValidCode | (static_cast<uint64_t>(rec.opcode & 0x7f) << 2) |
               (static_cast<uint64_t>(rec.funct3 & 0x7) << 9) |
               (static_cast<uint64_t>(e.gid) << 12) |
               (static_cast<uint64_t>(static_cast<uint8_t>(rec.kind) & 0xf) << 20) |
               ((rec.cycle & 0xffffffffffULL) << 24);
  return p;
}

ReorderFifo::ReorderFifo(unsigned lanes, size_t depth)
    : lanes_(lanes), pushes_(lanes, 0), depth_(depth) {
  if (lanes == 0) fail(ErrorKind::Config, "reorder FIFO needs at least one lane");
  if (depth == 0) fail(ErrorKind::Config, "reorder FIFO depth must be positive");
}

bool ReorderFifo::can_accept() const {
  for (const auto& l : lanes_) {
    if (l.size() >= depth_) return false;
  }
  return true;
}

ReorderFifo::StepResult ReorderFifo::push_row(std::span<const Packet> row) {
  if (row.empty()) return {};
  if (row.size() > lanes_.size()) fail(ErrorKind::Config, "row wider than the filter");
  if (!can_accept()) return {0, true};
  for (size_t lane = 0; lane < lanes_.size(); ++lane) {
    lanes_[lane].push_back(lane < row.size() ? row[lane] : Packet::invalid(Packet::kFillerSeq));
    ++pushes_[lane];
  }
  return {row.size(), false};
}

ReorderFifo::ArbiterResult ReorderFifo::arbiter_step() {
  ArbiterResult r;
  while (!lanes_[cursor_].empty()) {
    Packet p = lanes_[cursor_].front();
    lanes_[cursor_].pop_front();
    cursor_ = (cursor_ + 1) % lanes_.size();
    if (p.valid) {
      r.packet = p;
      return r;
    }
    ++r.skipped;
  }
  return r;
}

size_t ReorderFifo::buffered() const {
  size_t n = 0;
  for (const auto& l : lanes_) n += l.size();
  return n;
}

size_t ReorderFifo::buffered_valid() const {
  size_t n = 0;
  for (const auto& l : lanes_) {
    for (const auto& p : l) n += p.valid ? 1 : 0;
  }
  return n;
}

ReorderFifo::StepResult filter_step(ReorderFifo& fifo, const FilterTable& table,
                                    std::span<const TraceRecord> commits) {
  if (commits.empty()) return {};
  if (!fifo.can_accept()) return {0, true};
  std::array<Packet, 64> row;
  if (commits.size() > fifo.lanes() || commits.size() > row.size()) {
    fail(ErrorKind::Config, "more commits than filter lanes");
  }
  for (size_t i = 0; i < commits.size(); ++i) row[i] = classify(table, commits[i]);
  return fifo.push_row(std::span<const Packet>(row.data(), commits.size()));
}

}  // namespace fg
