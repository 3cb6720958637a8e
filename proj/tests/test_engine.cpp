#include <doctest.h>

#include "fireguard/engine.hpp"
#include "oracles.hpp"

using namespace fg;

namespace {

Packet load_pkt(uint64_t seq, uint64_t pc, uint64_t addr) {
  TraceRecord r;
  r.seq = seq;
  r.pc = pc;
  r.opcode = opcode::kLoad;
  r.kind = Kind::Load;
  r.mem_addr = addr;
  FilterTable t;
  t.program(filter_index(opcode::kLoad, 0), {1, false, true, false});
  return classify(t, r);
}

CostParams ma(ProgrammingModel m, uint64_t w, uint64_t l, unsigned u) {
  CostParams c;
  c.model = m;
  c.isax = IsaxMode::MaStage;
  c.work = w;
  c.loop = l;
  c.unroll = u;
  return c;
}

}  // namespace

TEST_CASE("op_cost") {
  CHECK(op_cost(IsaxMode::MaStage, true) == 2);
  CHECK(op_cost(IsaxMode::MaStage, false) == 1);
  CHECK(op_cost(IsaxMode::PostCommit, false) == 3);
  CHECK(op_cost(IsaxMode::PostCommit, true, 10) == 13);
  CHECK(op_cost(IsaxMode::PostCommit, true, 4) == 7);
  CHECK(op_cost(IsaxMode::PostCommit, true, 50) == 13);
}

TEST_CASE("schedule arithmetic") {
  BatchPlan u = plan_batch(ma(ProgrammingModel::Unrolled, 4, 2, 4), 8);
  CHECK(u.packets == 4);
  CHECK(u.cycles == 24);
  CHECK(u.offsets == std::vector<uint64_t>{9, 14, 19, 24});
  BatchPlan s = plan_batch(ma(ProgrammingModel::SingleIter, 4, 2, 4), 8);
  CHECK(s.packets == 1);
  CHECK(s.cycles == 10);

  // HYBRID below U behaves exactly like DUFF.
  BatchPlan h = plan_batch(ma(ProgrammingModel::Hybrid, 4, 2, 4), 2);
  BatchPlan d = plan_batch(ma(ProgrammingModel::Duff, 4, 2, 4), 2);
  CHECK(h.cycles == d.cycles);
  CHECK(h.offsets == d.offsets);
  CHECK(d.cycles == 2 + 2 + 2 * (2 + 4));

  CostParams acc;
  acc.accelerator = true;
  CHECK(drain_cycles(acc, 17) == 17);
  CHECK(plan_batch(acc, 0).packets == 0);
}

TEST_CASE("drain_cycles matches closed forms") {
  for (auto isax : {IsaxMode::MaStage, IsaxMode::PostCommit}) {
    for (unsigned u : {2u, 4u, 8u}) {
      for (uint64_t w = 0; w <= 8; w += 4) {
        CostParams c = ma(ProgrammingModel::SingleIter, w, 2, u);
        c.isax = isax;
        oracle::Costs k{op_cost(isax, true), op_cost(isax, false), w, 2, u};
        for (size_t n = 0; n <= 32; ++n) {
          c.model = ProgrammingModel::SingleIter;
          CHECK(drain_cycles(c, n) == oracle::single_iter_total(k, n));
          c.model = ProgrammingModel::Duff;
          CHECK(drain_cycles(c, n) == oracle::duff_total(k, n));
          c.model = ProgrammingModel::Unrolled;
          CHECK(drain_cycles(c, n) == oracle::unrolled_total(k, n));
          c.model = ProgrammingModel::Hybrid;
          CHECK(drain_cycles(c, n) == oracle::hybrid_total(k, n));
        }
      }
    }
  }
}

TEST_CASE("queue instructions") {
  Engine e(0);
  CHECK(e.q_count() == 0);
  CHECK(!e.q_top(0));
  CHECK(e.stats().queue_empty == 1);
  CHECK_THROWS_AS(e.q_recent(0), Error);

  for (uint64_t i = 0; i < 3; ++i) e.in_queue().push({load_pkt(i, 0x1000 + 4 * i, 0x8000 + i), 0});
  CHECK(e.q_count() == 3);
  CHECK(*e.q_top(0) == 0x1000);
  CHECK(*e.q_top(64) == 0x8000);
  CHECK_THROWS_AS(e.q_top(200), Error);
  auto p = e.q_pop();
  REQUIRE(p);
  CHECK(e.q_count() == 2);
  CHECK(e.q_recent(0) == 0x1000);
  CHECK(e.q_recent(64) == 0x8000);

  while (e.in_queue().push({load_pkt(9, 0, 0), 0})) {
  }
  CHECK(e.q_count() == 32);

  Engine o(1, 32, 32, 2);
  CHECK(o.q_push(0, 1, 5, 0));
  CHECK(o.q_push(0, 1, 6, 0));
  CHECK(!o.q_push(0, 1, 7, 0));
  CHECK(o.out_queue().size() == 2);
}

TEST_CASE("engine step charges the batch and reports pc from recent") {
  KernelParams kp;
  kp.asan_strict = true;
  Engine e(0);
  e.add_kernel(0, make_kernel(KernelType::Asan, kp, -1), ma(ProgrammingModel::Unrolled, 4, 2, 4));
  CHECK_THROWS_AS(e.add_kernel(0, make_kernel(KernelType::Asan, kp, -1), {}), Error);
  for (uint64_t i = 0; i < 8; ++i) e.in_queue().push({load_pkt(i, 0x1000 + 4 * i, 0x9000), 0});
  std::vector<uint64_t> seen;
  e.on_consume = [&](uint64_t s, unsigned) { seen.push_back(s); };
  e.step(0);
  CHECK(e.stats().consumed == 4);
  CHECK(e.stats().busy_cycles == 24);
  REQUIRE(e.verdicts().size() == 4);
  CHECK(e.verdicts()[0].pc == 0x1000);
  CHECK(e.verdicts()[0].detect_cycle == 9);
  CHECK(e.verdicts()[3].detect_cycle == 24);
  for (uint64_t s = 1; s < 24; ++s) e.step(s);
  CHECK(e.stats().consumed == 4);
  e.step(24);
  CHECK(e.stats().consumed == 8);
  CHECK(seen == std::vector<uint64_t>{0, 1, 2, 3, 4, 5, 6, 7});
  e.step(48);
  CHECK(e.stats().idle_polls == 1);
  CHECK(e.idle(49));
}

TEST_CASE("mode parsing") {
  CHECK(isax_from_string("post_commit") == IsaxMode::PostCommit);
  CHECK(isax_from_string("ma") == IsaxMode::MaStage);
  CHECK(model_from_string("hybrid") == ProgrammingModel::Hybrid);
  CHECK_THROWS_AS(model_from_string("loop"), Error);
}
