#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fireguard/engine.hpp"
#include "fireguard/filter.hpp"
#include "fireguard/kernels.hpp"
#include "fireguard/mapper.hpp"
#include "fireguard/noc.hpp"
#include "fireguard/trace.hpp"

namespace fg {

struct ClockConfig {
  double fast_hz = 3.2e9;
  double slow_hz = 1.6e9;
  size_t cdc_depth = 8;
  unsigned cdc_drain_per_slow = 0;  // 0 = ratio

  /// fast_hz / slow_hz; throws Config unless a positive integer.
  unsigned ratio() const;
};

namespace gid {
constexpr uint8_t kLoad = 1;
constexpr uint8_t kStore = 2;
constexpr uint8_t kCall = 3;
constexpr uint8_t kRet = 4;
constexpr uint8_t kHeap = 5;
constexpr uint8_t kBranch = 6;
constexpr uint8_t kAlu = 7;
}  // namespace gid

struct KernelConfig {
  KernelType type = KernelType::Asan;
  std::vector<unsigned> engines;       // empty = every engine
  std::vector<uint8_t> gids;           // empty = the kernel's defaults
  std::vector<uint8_t> broadcast_gids; // empty = the kernel's defaults
  Policy policy = Policy::AddrHash;
  unsigned fixed_target = 0;
  CostParams cost;
  KernelParams params;
};

std::vector<uint8_t> default_gids(KernelType type);
/// ASan/UaF shard by address, the shadow stack and PMC pin to one engine.
Policy default_policy(KernelType type);
std::vector<uint8_t> default_broadcast_gids(KernelType type);

struct SimConfig {
  unsigned commit_width = 4;
  unsigned filter_width = 4;
  size_t fifo_depth = 16;
  unsigned engines = 4;
  size_t queue_capacity = 32;
  size_t block_full_threshold = 0;  // 0 = queue_capacity
  unsigned skip_cost_cycles = 0;    // arbiter cycles per skipped invalid packet
  ClockConfig clock;
  int mesh_width = 0;  // 0 = pick from engine count
  int mesh_height = 0;
  size_t port_depth = 4;
  uint64_t seed = 1;
  double prf_conflict_p = 0.0;
  unsigned max_gids = kDefaultMaxGids;
  std::optional<FilterTable> filter_table;  // default built from kernels
  std::vector<KernelConfig> kernels;
  uint64_t deadlock_cycles = 1000000;  // fast cycles without progress
};

/// Throws Error(Config) on the first inconsistency.
void validate(const SimConfig& config);
FilterTable build_default_filter_table(const SimConfig& config);

enum StallCause : unsigned { kFilterFull = 0, kFifoFull, kCdcFull, kPrfConflict, kNumStallCauses };
std::string_view to_string(StallCause c);

struct VerdictRecord {
  Verdict verdict;
  uint64_t commit_cycle = 0;  // fast cycle at which seq committed
  double latency_cycles = 0;  // slow cycles
  double latency_ns = 0;
};

struct EngineMetrics {
  uint64_t consumed = 0;
  uint64_t messages = 0;
  uint64_t busy_cycles = 0;
  uint64_t idle_polls = 0;
  uint64_t queue_empty = 0;
  uint64_t push_stalls = 0;
  uint64_t wait_cycles = 0;
  uint64_t full_cycles = 0;  // slow cycles with a full input queue
  std::vector<uint64_t> occupancy;  // histogram over slow cycles, index = depth
};

struct Metrics {
  uint64_t records = 0;
  uint64_t baseline_cycles = 0;
  uint64_t stalled_cycles = 0;
  std::array<uint64_t, kNumStallCauses> stalls{};
  uint64_t mq_full_slow_cycles = 0;  // slow cycles a multicast waited on a full queue
  uint64_t fast_cycles = 0;
  uint64_t slow_cycles = 0;
  uint64_t fifo_full_cycles = 0;
  uint64_t cdc_full_cycles = 0;
  uint64_t sensitive = 0;          // valid packets produced by the filter
  uint64_t multicasts = 0;         // packets delivered to engine queues
  uint64_t delivered_entries = 0;  // queue entries after fan-out
  uint64_t no_subscriber = 0;
  uint64_t consumed = 0;
  uint64_t mesh_injected = 0;
  uint64_t mesh_delivered = 0;
  uint64_t mesh_flit_moves = 0;
  std::vector<EngineMetrics> engines;
  std::vector<VerdictRecord> verdicts;  // sorted by (seq, class, engine, kernel)

  double slowdown() const;
  double cycles_per_packet() const;
};

struct LatencyEntry {
  GroundTruth truth;
  bool detected = false;
  double latency_cycles = 0;
  double latency_ns = 0;
};

struct LatencyReport {
  std::vector<LatencyEntry> entries;
  size_t misses = 0;
  double min_ns = 0;
  double median_ns = 0;
  double max_ns = 0;
};

/// Matches each ground-truth attack with the earliest verdict of the expected
/// class whose seq falls within the attack's records.
LatencyReport measure_latency(const Metrics& metrics, const std::vector<GroundTruth>& truths);

class Simulator {
 public:
  Simulator(Trace trace, SimConfig config);
  ~Simulator();
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  /// One fast cycle.
  void tick();
  bool done() const;
  /// Runs to completion and returns the metrics.
  Metrics run();
  Metrics metrics() const;

  /// Conservation of sensitive packets and of fan-out entries.
  bool conserved() const;

  /// Called with every packet leaving the arbiter, in order.
  std::function<void(const Packet&)> on_arbiter_output;
  /// Called with (seq, engine, kernel) for every queue entry an engine pops.
  std::function<void(uint64_t, unsigned, unsigned)> on_consume;

  uint64_t fast_cycle() const { return cycle_; }
  uint64_t slow_cycle() const { return slow_; }
  const SimConfig& config() const { return config_; }
  const Engine& engine(unsigned i) const { return *engines_[i]; }
  size_t cdc_size() const { return cdc_.size(); }
  bool cdc_full() const { return cdc_.size() >= config_.clock.cdc_depth; }
  const ReorderFifo& fifo() const { return fifo_; }
  uint64_t in_flight_packets() const;
  uint64_t in_flight_entries() const;

 private:
  struct CdcEntry {
    Packet packet;
    std::vector<Delivery> deliveries;
    uint64_t eligible = 0;  // first slow cycle that may drain it
  };
  struct Held {
    Packet packet;
    Allocation alloc;
  };
  class Endpoints;

  void commit_stage();
  void stall(StallCause c);
  void allocator_stage();
  void slow_step();
  std::vector<size_t> occupancy() const;

  Trace trace_;
  SimConfig config_;
  unsigned ratio_ = 1;
  unsigned drain_ = 1;
  FilterTable table_;
  ReorderFifo fifo_;
  std::unique_ptr<Allocator> allocator_;
  std::vector<std::unique_ptr<Engine>> engines_;
  std::unique_ptr<Mesh> mesh_;
  std::deque<CdcEntry> cdc_;
  std::optional<Held> held_;

  uint64_t cycle_ = 0;
  uint64_t slow_ = 0;
  size_t next_ = 0;          // next record to commit
  size_t group_end_ = 0;     // end of the group being committed in chunks
  bool in_group_ = false;
  unsigned prf_penalty_ = 0;
  uint64_t arbiter_busy_ = 0;
  bool pending_conflict_ = false;
  std::vector<size_t> cdc_pending_;  // per engine, entries waiting in the CDC
  uint64_t last_progress_ = 0;
  std::vector<uint64_t> commit_cycle_;
  std::vector<uint64_t> consumed_seen_;
  Metrics m_;
};

/// Builds and runs a simulator.
Metrics simulate(const Trace& trace, const SimConfig& config);

}  // namespace fg
