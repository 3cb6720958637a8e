#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "fireguard/kernels.hpp"
#include "fireguard/noc.hpp"
#include "fireguard/queue.hpp"

namespace fg {

enum class IsaxMode : uint8_t { MaStage, PostCommit };
enum class QueueOp : uint8_t { Count, Top, Pop, Recent, Push };

std::string_view to_string(IsaxMode m);
IsaxMode isax_from_string(std::string_view s);

/// Cycles for one queue instruction. `dependent` means the next instruction
/// consumes the result immediately.
uint64_t op_cost(IsaxMode mode, bool dependent, uint64_t hazard = 4);

enum class ProgrammingModel : uint8_t { SingleIter, Duff, Unrolled, Hybrid };

std::string_view to_string(ProgrammingModel m);
ProgrammingModel model_from_string(std::string_view s);

struct CostParams {
  ProgrammingModel model = ProgrammingModel::Hybrid;
  IsaxMode isax = IsaxMode::MaStage;
  uint64_t hazard = 4;  // post-commit dependency penalty, clamped to 10
  uint64_t work = 4;    // per-packet kernel body
  uint64_t loop = 2;    // per-iteration loop overhead
  unsigned unroll = 4;
  bool accelerator = false;  // fixed-function engine: 1 cycle per packet
};

struct BatchPlan {
  size_t packets = 0;
  uint64_t cycles = 0;
  std::vector<uint64_t> offsets;  // completion offset of each packet
};

/// One loop iteration over a queue holding `available` packets.
BatchPlan plan_batch(const CostParams& cp, size_t available);
/// Cycles to drain n packets under repeated iterations.
uint64_t drain_cycles(const CostParams& cp, size_t n);

struct EngineStats {
  uint64_t consumed = 0;
  uint64_t messages = 0;
  uint64_t busy_cycles = 0;   // cycles charged to batches and messages
  uint64_t idle_polls = 0;    // steps that found every queue empty
  uint64_t queue_empty = 0;   // q_top/q_pop on an empty queue
  uint64_t push_stalls = 0;
  uint64_t wait_cycles = 0;   // blocked on a mesh reply
  uint64_t pushes = 0;
};

/// One guardian engine: input queue fed by the mapper, receive queue fed by
/// the mesh, and an output queue drained into the mesh.
class Engine : private KernelIo {
 public:
  Engine(unsigned index, size_t queue_capacity = 32, size_t net_capacity = 32,
         size_t out_capacity = 32);
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  void add_kernel(unsigned kernel_id, std::unique_ptr<GuardianKernel> kernel, CostParams cost);
  bool hosts(unsigned kernel_id) const;

  // Queue instructions.
  size_t q_count() const { return in_q_.size(); }
  std::optional<uint64_t> q_top(unsigned bit_offset);
  std::optional<Packet> q_pop();
  uint64_t q_recent(unsigned bit_offset) const;
  bool q_push(int dst, uint8_t tag, uint64_t value, unsigned kernel);

  /// Advance one slow-clock cycle.
  void step(uint64_t slow_cycle);
  bool idle(uint64_t slow_cycle) const;

  BoundedQueue<QueueEntry>& in_queue() { return in_q_; }
  const BoundedQueue<QueueEntry>& in_queue() const { return in_q_; }
  BoundedQueue<FabricPacket>& net_queue() { return net_q_; }
  BoundedQueue<FabricPacket>& out_queue() { return out_q_; }

  unsigned index() const { return index_; }
  const EngineStats& stats() const { return stats_; }
  std::vector<Verdict>& verdicts() { return verdicts_; }
  const std::vector<Verdict>& verdicts() const { return verdicts_; }
  size_t deferred() const { return deferred_.size(); }

  /// Called with (seq, kernel) for every entry popped from the input queue.
  std::function<void(uint64_t, unsigned)> on_consume;

 private:
  struct Slot {
    unsigned id = 0;
    std::unique_ptr<GuardianKernel> kernel;
    CostParams cost;
  };

  Slot& slot(unsigned kernel_id);
  uint64_t run_packet(Slot& s, const QueueEntry& e, uint64_t detect, bool& blocked);
  uint64_t flush_pushes();

  uint64_t recent(unsigned bit_offset) override { return q_recent(bit_offset); }
  void push(int dst_engine, uint8_t tag, uint64_t value) override;
  void report(ViolationClass cls, uint64_t seq) override;

  unsigned index_;
  BoundedQueue<QueueEntry> in_q_;
  BoundedQueue<FabricPacket> net_q_;
  BoundedQueue<FabricPacket> out_q_;
  std::vector<Slot> slots_;
  std::optional<Packet> recent_;
  std::deque<QueueEntry> deferred_;
  std::deque<FabricPacket> pending_;
  uint64_t busy_until_ = 0;
  uint64_t detect_ = 0;
  unsigned current_kernel_ = 0;
  size_t pushed_this_step_ = 0;
  EngineStats stats_;
  std::vector<Verdict> verdicts_;
};

}  // namespace fg
