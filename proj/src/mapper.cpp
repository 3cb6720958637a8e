#include "fireguard/mapper.hpp"

#include <algorithm>
#include <map>

namespace fg {

namespace {

unsigned next_set_bit_after(EngineMask mask, unsigned after) {
  for (unsigned step = 1; step <= kMaxEngines; ++step) {
    unsigned b = (after + step) % kMaxEngines;
    if (mask & (1ULL << b)) return b;
  }
  return after;
}

unsigned nth_set_bit(EngineMask mask, unsigned n) {
  for (unsigned b = 0; b < kMaxEngines; ++b) {
    if (mask & (1ULL << b)) {
      if (n == 0) return b;
      --n;
    }
  }
  return 0;
}

}  // namespace

Distributor::Distributor(unsigned max_gids, unsigned num_ses)
    : se_bitmap_(max_gids, 0), num_ses_(num_ses) {
  if (num_ses == 0 || num_ses > kMaxSchedulingEngines) {
    fail(ErrorKind::Config, "number of scheduling engines must be in [1,32]");
  }
}

void Distributor::subscribe(uint8_t gid, unsigned se) {
  if (se >= num_ses_) fail(ErrorKind::Config, "scheduling engine index out of range");
  if (gid == 0 || gid >= se_bitmap_.size()) {
    fail(ErrorKind::Config, "gid " + std::to_string(gid) + " cannot be subscribed");
  }
  se_bitmap_[gid] |= 1u << se;
}

void Distributor::set_bitmap(uint8_t gid, uint32_t se_mask) {
  if (gid == 0 || gid >= se_bitmap_.size()) {
    fail(ErrorKind::Config, "gid " + std::to_string(gid) + " out of range");
  }
  if (num_ses_ < 32 && (se_mask >> num_ses_) != 0) {
    fail(ErrorKind::Config, "SE bitmap wider than the number of SEs");
  }
  se_bitmap_[gid] = se_mask;
}

uint32_t Distributor::distribute(uint8_t gid) {
  if (gid == 0 || gid >= se_bitmap_.size()) {
    fail(ErrorKind::Config, "gid " + std::to_string(gid) + " reached the distributor");
  }
  uint32_t m = se_bitmap_[gid];
  if (m == 0) ++no_subscriber_;
  return m;
}

std::string_view to_string(Policy p) {
  switch (p) {
    case Policy::Fixed: return "fixed";
    case Policy::RoundRobin: return "round_robin";
    case Policy::Block: return "block";
    case Policy::AddrHash: return "addr_hash";
  }
  return "?";
}

Policy policy_from_string(std::string_view s) {
  if (s == "fixed") return Policy::Fixed;
  if (s == "round_robin" || s == "rr") return Policy::RoundRobin;
  if (s == "block") return Policy::Block;
  if (s == "addr_hash") return Policy::AddrHash;
  fail(ErrorKind::Config, "unknown scheduling policy '" + std::string(s) + "'");
}

void SchedulingEngine::reset() {
  if (ae_mask == 0) fail(ErrorKind::Config, "scheduling engine has an empty AE bitmap");
  if (policy == Policy::Fixed &&
      (fixed_target >= kMaxEngines || !(ae_mask & (1ULL << fixed_target)))) {
    fail(ErrorKind::Config, "FIXED target " + std::to_string(fixed_target) + " not in AE bitmap");
  }
  pt_reg = ct_reg = static_cast<unsigned>(__builtin_ctzll(ae_mask));
}

bool SchedulingEngine::broadcasts(uint8_t gid) const {
  return std::find(broadcast_gids.begin(), broadcast_gids.end(), gid) != broadcast_gids.end();
}

EngineMask schedule(SchedulingEngine& se, std::span<const size_t> occupancy, uint64_t address) {
  if (se.ae_mask == 0) fail(ErrorKind::Config, "scheduling engine has an empty AE bitmap");
  unsigned target = se.pt_reg;
  switch (se.policy) {
    case Policy::Fixed:
      if (se.fixed_target >= kMaxEngines || !(se.ae_mask & (1ULL << se.fixed_target))) {
        fail(ErrorKind::Config, "FIXED target not in AE bitmap");
      }
      target = se.fixed_target;
      break;
    case Policy::RoundRobin:
      target = next_set_bit_after(se.ae_mask, se.pt_reg);
      break;
    case Policy::Block: {
      bool pt_ok = (se.ae_mask & (1ULL << se.pt_reg)) != 0;
      size_t occ = se.pt_reg < occupancy.size() ? occupancy[se.pt_reg] : 0;
      target = (pt_ok && occ < se.block_full_threshold) ? se.pt_reg
                                                        : next_set_bit_after(se.ae_mask, se.pt_reg);
      break;
    }
    case Policy::AddrHash: {
      unsigned n = popcount64(se.ae_mask);
      unsigned k = static_cast<unsigned>(mix64(address >> 6) % n);
      target = nth_set_bit(se.ae_mask, k);
      break;
    }
  }
  se.ct_reg = target;
  return 1ULL << target;
}

Allocator::Allocator(Distributor distributor, std::vector<SchedulingEngine> ses)
    : distributor_(std::move(distributor)), ses_(std::move(ses)) {
  if (ses_.size() > distributor_.num_ses()) {
    fail(ErrorKind::Config, "more scheduling engines than distributor slots");
  }
  for (auto& se : ses_) se.reset();
}

Allocation Allocator::allocate(const Packet& pkt, std::span<const size_t> occupancy) {
  Allocation a;
  a.ses = distributor_.distribute(pkt.gid);
  for (unsigned s = 0; s < ses_.size(); ++s) {
    if (!(a.ses & (1u << s))) continue;
    SchedulingEngine& se = ses_[s];
    EngineMask m = se.broadcasts(pkt.gid) ? se.ae_mask : schedule(se, occupancy, pkt.address());
    a.mask |= m;
    for (unsigned e = 0; e < kMaxEngines; ++e) {
      if (m & (1ULL << e)) a.deliveries.push_back({e, se.kernel_id});
    }
  }
  std::sort(a.deliveries.begin(), a.deliveries.end(), [](const Delivery& x, const Delivery& y) {
    return x.engine != y.engine ? x.engine < y.engine : x.kernel < y.kernel;
  });
  return a;
}

void Allocator::commit(const Allocation& a) {
  for (unsigned s = 0; s < ses_.size(); ++s) {
    if (a.ses & (1u << s)) commit_transmission(ses_[s]);
  }
}

MulticastResult multicast_deliver(std::span<const Delivery> deliveries, const Packet& pkt,
                                  std::span<BoundedQueue<QueueEntry>* const> queues) {
  if (deliveries.empty()) return {false, false};
  std::map<unsigned, size_t> need;
  for (const auto& d : deliveries) {
    if (d.engine >= queues.size()) fail(ErrorKind::Config, "delivery to unknown engine");
    ++need[d.engine];
  }
  for (const auto& [engine, n] : need) {
    if (queues[engine]->space() < n) return {false, true};
  }
  for (const auto& d : deliveries) queues[d.engine]->push({pkt, d.kernel});
  return {true, false};
}

}  // namespace fg
