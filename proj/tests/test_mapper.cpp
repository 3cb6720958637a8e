#include <doctest.h>

#include <vector>

#include "fireguard/mapper.hpp"

using namespace fg;

namespace {

Packet pkt(uint64_t seq, uint8_t gid, uint64_t addr = 0) {
  Packet p;
  p.seq = seq;
  p.gid = gid;
  p.valid = true;
  p.words[1] = addr;
  p.words[3] = Packet::kValidCode | (static_cast<uint64_t>(gid) << 12);
  return p;
}

SchedulingEngine se(Policy p, EngineMask mask, unsigned fixed = 0) {
  SchedulingEngine s;
  s.policy = p;
  s.ae_mask = mask;
  s.fixed_target = fixed;
  s.reset();
  return s;
}

}  // namespace

TEST_CASE("distribute") {
  Distributor d(256, 4);
  d.subscribe(3, 0);
  CHECK(d.distribute(3) == 0b0001);
  CHECK(d.distribute(9) == 0);
  CHECK(d.no_subscriber() == 1);
  d.subscribe(5, 0);
  d.subscribe(5, 2);
  CHECK(d.distribute(5) == 0b0101);
  CHECK_THROWS_AS(d.distribute(0), Error);
  Distributor small(8, 2);
  CHECK_THROWS_AS(small.distribute(8), Error);
  CHECK_THROWS_AS(small.subscribe(1, 2), Error);
}

TEST_CASE("schedule policies") {
  std::vector<size_t> occ(8, 0);
  auto rr = se(Policy::RoundRobin, 0b1111);
  rr.pt_reg = 1;
  CHECK(schedule(rr, occ) == 0b0100);
  CHECK(rr.pt_reg == 1);  // only ct_reg moves before commit
  commit_transmission(rr);
  CHECK(rr.pt_reg == 2);
  rr.pt_reg = 3;
  CHECK(schedule(rr, occ) == 0b0001);

  auto blk = se(Policy::Block, 0b1111);
  blk.block_full_threshold = 32;
  occ[0] = 32;
  CHECK(schedule(blk, occ) == 0b0010);
  occ[0] = 31;
  CHECK(schedule(blk, occ) == 0b0001);

  auto fx = se(Policy::Fixed, 0b100000, 5);
  occ.assign(8, 32);
  CHECK(schedule(fx, occ) == (1u << 5));
  CHECK_THROWS_AS(se(Policy::Fixed, 0b0011, 5), Error);

  auto h = se(Policy::AddrHash, 0b1010);
  for (uint64_t a = 0; a < 4096; a += 8) {
    EngineMask m = schedule(h, occ, a);
    CHECK(popcount64(m) == 1);
    CHECK((m & 0b1010) == m);
    // Same 64-byte line, same shard.
    CHECK(schedule(h, occ, a | 0x3f) == m);
  }
}

TEST_CASE("round robin is fair") {
  auto rr = se(Policy::RoundRobin, 0b10110);
  std::vector<size_t> occ(8, 0), hits(8, 0);
  for (int i = 0; i < 300; ++i) {
    EngineMask m = schedule(rr, occ);
    commit_transmission(rr);
    ++hits[__builtin_ctzll(m)];
  }
  CHECK(hits[1] == 100);
  CHECK(hits[2] == 100);
  CHECK(hits[4] == 100);
}

TEST_CASE("allocate is the union of per-SE choices") {
  Distributor d(256, 2);
  d.subscribe(1, 0);
  d.subscribe(1, 1);
  auto s0 = se(Policy::Fixed, 0b1111, 1);
  auto s0_copy = s0;
  auto s1 = se(Policy::RoundRobin, 0b1111);
  s1.pt_reg = 2;
  s0.kernel_id = 0;
  s1.kernel_id = 1;
  auto s1_copy = s1;
  Allocator a(d, {s0, s1});
  a.ses()[1].pt_reg = 2;
  std::vector<size_t> occ(4, 0);
  Allocation x = a.allocate(pkt(0, 1), occ);
  EngineMask oracle = schedule(s0_copy, occ) | schedule(s1_copy, occ);
  CHECK(x.mask == oracle);
  CHECK(x.mask == 0b1010);
  CHECK(x.deliveries == std::vector<Delivery>{{1, 0}, {3, 1}});
  a.commit(x);
  CHECK(a.ses()[1].pt_reg == 3);

  CHECK(a.allocate(pkt(1, 9), occ).mask == 0);
  CHECK(a.distributor().no_subscriber() == 1);

  Distributor d1(256, 1);
  d1.subscribe(1, 0);
  Allocator single(d1, {se(Policy::RoundRobin, 0b0110)});
  CHECK(single.allocate(pkt(2, 1), occ).mask == 0b0100);
}

TEST_CASE("broadcast gids reach every engine of the SE") {
  Distributor d(256, 1);
  d.subscribe(5, 0);
  auto s = se(Policy::AddrHash, 0b1101);
  s.broadcast_gids = {5};
  Allocator a(d, {s});
  std::vector<size_t> occ(4, 0);
  CHECK(a.allocate(pkt(0, 5, 0x8000), occ).mask == 0b1101);
}

TEST_CASE("multicast is all-or-nothing") {
  std::vector<BoundedQueue<QueueEntry>> qs;
  for (int i = 0; i < 4; ++i) qs.emplace_back(2);
  std::vector<BoundedQueue<QueueEntry>*> ptrs;
  for (auto& q : qs) ptrs.push_back(&q);
  std::vector<Delivery> dl = {{0, 0}, {2, 0}};
  auto r = multicast_deliver(dl, pkt(7, 1), ptrs);
  CHECK(r.delivered);
  CHECK(qs[0].front().packet.seq == 7);
  CHECK(qs[2].front().packet.seq == 7);
  qs[2].push({pkt(8, 1), 0});
  auto s = multicast_deliver(dl, pkt(9, 1), ptrs);
  CHECK(!s.delivered);
  CHECK(s.stalled);
  CHECK(qs[0].size() == 1);
  CHECK(qs[2].size() == 2);
  auto n = multicast_deliver({}, pkt(10, 1), ptrs);
  CHECK(!n.delivered);
  CHECK(!n.stalled);
  // Two kernels on one engine need two free slots.
  std::vector<Delivery> two = {{1, 0}, {1, 1}};
  qs[1].push({pkt(11, 1), 0});
  CHECK(multicast_deliver(two, pkt(12, 1), ptrs).stalled);
}
