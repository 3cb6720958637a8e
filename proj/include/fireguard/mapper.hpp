#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fireguard/filter.hpp"
#include "fireguard/queue.hpp"

namespace fg {

constexpr unsigned kMaxEngines = 64;
constexpr unsigned kMaxSchedulingEngines = 32;

using EngineMask = uint64_t;

class Distributor {
 public:
  explicit Distributor(unsigned max_gids = kDefaultMaxGids, unsigned num_ses = 4);

  void subscribe(uint8_t gid, unsigned se);
  void set_bitmap(uint8_t gid, uint32_t se_mask);

  /// SE bitmask for a gid; a zero mask counts one no-subscriber drop.
  uint32_t distribute(uint8_t gid);
  uint32_t bitmap(uint8_t gid) const { return se_bitmap_.at(gid); }

  unsigned num_ses() const { return num_ses_; }
  uint64_t no_subscriber() const { return no_subscriber_; }

 private:
  std::vector<uint32_t> se_bitmap_;
  unsigned num_ses_;
  uint64_t no_subscriber_ = 0;
};

enum class Policy : uint8_t { Fixed, RoundRobin, Block, AddrHash };

std::string_view to_string(Policy p);
Policy policy_from_string(std::string_view s);

struct SchedulingEngine {
  unsigned kernel_id = 0;
  Policy policy = Policy::RoundRobin;
  unsigned fixed_target = 0;
  EngineMask ae_mask = 0;
  unsigned pt_reg = 0;
  unsigned ct_reg = 0;
  size_t block_full_threshold = 32;
  // Gids this SE forwards to every engine in ae_mask (allocator events).
  std::vector<uint8_t> broadcast_gids;

  /// Sets pt_reg/ct_reg to the lowest engine in ae_mask; validates FIXED.
  void reset();
  bool broadcasts(uint8_t gid) const;
};

/// One-hot target for the packet; updates ct_reg only. `address` feeds the
/// address-hash policy.
EngineMask schedule(SchedulingEngine& se, std::span<const size_t> occupancy,
                    uint64_t address = 0);

/// Moves ct_reg into pt_reg once the transmission has left the allocator.
inline void commit_transmission(SchedulingEngine& se) { se.pt_reg = se.ct_reg; }

struct Delivery {
  unsigned engine = 0;
  unsigned kernel = 0;

  bool operator==(const Delivery&) const = default;
};

struct Allocation {
  EngineMask mask = 0;
  std::vector<Delivery> deliveries;  // one per (engine, kernel) pair
  uint32_t ses = 0;
};

class Allocator {
 public:
  Allocator(Distributor distributor, std::vector<SchedulingEngine> ses);

  /// OR of every activated SE's choice. Does not commit pt_reg.
  Allocation allocate(const Packet& pkt, std::span<const size_t> occupancy);
  void commit(const Allocation& a);

  Distributor& distributor() { return distributor_; }
  const Distributor& distributor() const { return distributor_; }
  std::vector<SchedulingEngine>& ses() { return ses_; }
  const std::vector<SchedulingEngine>& ses() const { return ses_; }

 private:
  Distributor distributor_;
  std::vector<SchedulingEngine> ses_;
};

struct MulticastResult {
  bool delivered = false;
  bool stalled = false;
};

/// All-or-nothing: either every delivery is enqueued or none is.
MulticastResult multicast_deliver(std::span<const Delivery> deliveries, const Packet& pkt,
                                  std::span<BoundedQueue<QueueEntry>* const> queues);

}  // namespace fg
